#ifndef DWBUS_DWBUS_H
#define DWBUS_DWBUS_H

#include <stddef.h>
#include <stdint.h>

#if defined(DWBUS_BUILDING)
#define DWBUS_API __attribute__((visibility("default")))
#else
#define DWBUS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status of every call. The machine code of the last failure on the calling
 * thread is available from dwb_last_error_code(). */
typedef enum dwb_status {
  DWB_OK = 0,
  DWB_INVALID = 1, /* validation or query error */
  DWB_IO = 2,      /* file system, corrupt catalog */
  DWB_USAGE = 3    /* bad arguments */
} dwb_status;

typedef struct dwb_catalog dwb_catalog;

DWBUS_API const char* dwb_version(void);

/* Message and machine code of the last failure on this thread; "" if none. */
DWBUS_API const char* dwb_last_error(void);
DWBUS_API const char* dwb_last_error_code(void);

/* Releases strings returned through char** out-parameters. */
DWBUS_API void dwb_free(char* s);

/* Parses and validates a schema file. *report_json (may be NULL) receives
 * {"ok", "diagnostics": [{line, column, message, text}], "composition"}.
 * Returns DWB_OK iff the schema is valid. */
DWBUS_API dwb_status dwb_schema_check(const char* path, char** report_json);

/* read_write = 0 opens read-only and requires an existing catalog. */
DWBUS_API dwb_status dwb_catalog_open(const char* root, int read_write, dwb_catalog** out);
DWBUS_API void dwb_catalog_close(dwb_catalog* catalog);

/* Installs the schema file unless the catalog already holds it.
 * *installed (may be NULL) is set to 1 when a new version was installed. */
DWBUS_API dwb_status dwb_install_schema(dwb_catalog* catalog, const char* schema_path, int* installed);

/* Loads every source of a sources.manifest. *reports_json receives an array
 * of load reports; already-loaded sources have "duplicate": true. */
DWBUS_API dwb_status dwb_load_manifest(dwb_catalog* catalog, const char* manifest_path, char** reports_json);

/* CubeQuery JSON in, CubeResult JSON out (canonical form). */
DWBUS_API dwb_status dwb_query(dwb_catalog* catalog, const char* query_json, char** result_json);

/* {"query", "op", ...} in, transformed CubeQuery JSON out. */
DWBUS_API dwb_status dwb_navigate(dwb_catalog* catalog, const char* request_json, char** query_json);

/* Writes the attribute-value view of `fact` to out_path. select_csv lists
 * "dimension.attribute" or measure names ("" for everything); filters_json
 * is a JSON array of filters or NULL. *rows (may be NULL) gets the row count. */
DWBUS_API dwb_status dwb_export_av(dwb_catalog* catalog, const char* fact, const char* select_csv,
                                   const char* filters_json, const char* out_path, size_t* rows);

/* Complex-fact assembly JSON for one central row. */
DWBUS_API dwb_status dwb_assemble(dwb_catalog* catalog, const char* group, uint64_t report_id, char** assembly_json);

/* Serves the HTTP API until the process is stopped. */
DWBUS_API dwb_status dwb_serve(const char* root, const char* host, int port, int read_only);

#ifdef __cplusplus
}
#endif

#endif /* DWBUS_DWBUS_H */
