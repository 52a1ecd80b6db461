#include <stdio.h>
#include <string.h>

#include "mps.h"

#define CHECK(cond)                                              \
  do {                                                           \
    if (!(cond)) {                                               \
      const char *err = mps_last_error();                        \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,   \
              #cond, err ? err : "no error");                    \
      return 1;                                                  \
    }                                                            \
  } while (0)

int main(void) {
  uint64_t total = 0;
  CHECK(mps_parse_budget("64x4x800x8", &total) == MPS_STATUS_OK);
  CHECK(total == 1638400);
  CHECK(mps_compute_budget(0, 4, 800, 8, &total) == MPS_STATUS_INVALID_ARGUMENT);
  CHECK(mps_last_error() != NULL);

  uint8_t score = 0;
  CHECK(mps_tactic_score("push_cast at h", &score) == MPS_STATUS_OK);
  CHECK(score == 2);

  MpsWorld *world = NULL;
  CHECK(mps_world_generate(40, 3, 4, 0.3, 0.1, 5, &world) == MPS_STATUS_OK);
  MpsReport *report = NULL;
  CHECK(mps_search_world(world, "oracle", "{\"budget\": \"1x4x50x8\"}", &report) == MPS_STATUS_OK);
  CHECK(mps_report_solved(report));
  CHECK(mps_report_kind(report) == MPS_OUTCOME_KIND_SOLVED);
  CHECK(mps_report_proof_len(report) == 4);
  char *tactic = mps_report_tactic(report, 0);
  CHECK(tactic != NULL && strlen(tactic) > 0);
  mps_string_free(tactic);
  mps_report_free(report);
  mps_world_free(world);
  printf("ok\n");
  return 0;
}
