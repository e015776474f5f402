/* Exercises the C API through the shared library only. */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "dwbus/dwbus.h"

static int failures = 0;

#define CHECK(cond)                                              \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__,     \
              __LINE__, #cond);                                  \
      ++failures;                                                \
    }                                                            \
  } while (0)

static void remove_tree(const char* path) {
  char cmd[4096];
  snprintf(cmd, sizeof cmd, "rm -rf '%s'", path);
  if (system(cmd) != 0) fprintf(stderr, "could not clear %s\n", path);
}

int main(int argc, char** argv) {
  const char* root = argc > 1 ? argv[1] : "capi-catalog";
  const char* schema = DWBUS_FIXTURES "/medical/medical.dws";
  const char* broken = DWBUS_FIXTURES "/medical/broken.dws";
  const char* manifest = DWBUS_FIXTURES "/medical/sources.manifest";
  char* out = NULL;
  dwb_catalog* cat = NULL;
  int installed = 0;

  remove_tree(root);
  CHECK(strlen(dwb_version()) > 0);

  CHECK(dwb_schema_check(schema, &out) == DWB_OK);
  CHECK(out != NULL && strstr(out, "\"ok\":true") != NULL);
  dwb_free(out);
  out = NULL;
  CHECK(dwb_schema_check(broken, &out) == DWB_INVALID);
  CHECK(out != NULL && strstr(out, "dangling reference") != NULL);
  dwb_free(out);
  out = NULL;
  CHECK(dwb_schema_check("/no/such/file.dws", NULL) == DWB_IO);

  CHECK(dwb_catalog_open(root, 0, &cat) == DWB_IO);
  CHECK(strcmp(dwb_last_error_code(), "io_error") == 0);
  CHECK(dwb_catalog_open(NULL, 1, &cat) == DWB_USAGE);

  CHECK(dwb_catalog_open(root, 1, &cat) == DWB_OK);
  CHECK(dwb_install_schema(cat, schema, &installed) == DWB_OK);
  CHECK(installed == 1);
  CHECK(dwb_install_schema(cat, schema, &installed) == DWB_OK);
  CHECK(installed == 0);

  CHECK(dwb_load_manifest(cat, manifest, &out) == DWB_OK);
  CHECK(out != NULL && strstr(out, "\"duplicate\":false") != NULL);
  dwb_free(out);
  out = NULL;
  CHECK(dwb_load_manifest(cat, manifest, &out) == DWB_OK);
  CHECK(out != NULL && strstr(out, "\"duplicate\":false") == NULL);
  dwb_free(out);
  out = NULL;

  CHECK(dwb_query(cat,
                  "{\"fact\":\"biological\",\"group_by\":[{\"dimension\":\"medical-analysis\",\"level\":\"analysis\"}],"
                  "\"measures\":[{\"measure\":\"value\",\"aggregate\":\"avg\"}],\"flag_normality\":true}",
                  &out) == DWB_OK);
  CHECK(out != NULL && strstr(out, "\"flagged\":true") != NULL);
  dwb_free(out);
  out = NULL;
  CHECK(dwb_query(cat, "{\"fact\":\"nope\",\"measures\":[{\"measure\":\"value\",\"aggregate\":\"sum\"}]}", &out) ==
        DWB_INVALID);
  CHECK(strcmp(dwb_last_error_code(), "unknown_name") == 0);
  CHECK(dwb_query(cat, "{", &out) == DWB_INVALID);
  CHECK(strcmp(dwb_last_error_code(), "bad_request") == 0);

  CHECK(dwb_navigate(cat,
                     "{\"op\":\"roll_up\",\"dimension\":\"time\",\"query\":{\"fact\":\"biological\","
                     "\"group_by\":[{\"dimension\":\"time\",\"level\":\"month\"}],"
                     "\"measures\":[{\"measure\":\"value\",\"aggregate\":\"count\"}]}}",
                     &out) == DWB_OK);
  CHECK(out != NULL && strstr(out, "\"level\":\"year\"") != NULL);
  dwb_free(out);
  out = NULL;

  {
    char path[4096];
    size_t rows = 0;
    snprintf(path, sizeof path, "%s/av.csv", root);
    CHECK(dwb_export_av(cat, "biometrical", "patient.code,value", NULL, path, &rows) == DWB_OK);
    CHECK(rows > 0);
    CHECK(dwb_export_av(cat, "biometrical", "", "[{\"dimension\":\"patient\",\"level\":\"patient\",\"op\":\"=\","
                        "\"value\":\"P001\"}]", path, &rows) == DWB_OK);
    CHECK(rows > 0);
  }

  CHECK(dwb_assemble(cat, "cardio-vascular", 1, &out) == DWB_OK);
  CHECK(out != NULL && strstr(out, "\"satellites\"") != NULL);
  dwb_free(out);
  out = NULL;
  CHECK(dwb_assemble(cat, "cardio-vascular", 999, &out) == DWB_INVALID);
  CHECK(strcmp(dwb_last_error_code(), "not_found") == 0);

  dwb_catalog_close(cat);

  CHECK(dwb_catalog_open(root, 0, &cat) == DWB_OK);
  CHECK(dwb_load_manifest(cat, manifest, &out) != DWB_OK);
  CHECK(strcmp(dwb_last_error_code(), "read_only") == 0);
  dwb_catalog_close(cat);

  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
