#include <math.h>
#include <stdio.h>
#include <string.h>

#include "ridesim.h"

static const char *CONFIG =
    "{\"horizon_s\": 3600, \"n_travellers\": 20, \"n_drivers\": 3, \"seed\": 5,"
    " \"platforms\": [{\"platform_id\": 0, \"base_fare\": 1.0, \"fare_per_km\": 1.0,"
    " \"commission_rate\": 0.2, \"matching\": \"instant\"}],"
    " \"graph\": {\"grid\": {\"rows\": 3, \"cols\": 3, \"spacing_m\": 600, \"speed_mps\": 10}}}";

#define CHECK(call)                                                        \
    do {                                                                   \
        RidesimStatus s = (call);                                          \
        if (s != RIDESIM_STATUS_OK) {                                      \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s,         \
                    ridesim_last_error());                                 \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    RidesimScenario *scenario = NULL;
    CHECK(ridesim_scenario_from_json(CONFIG, NULL, &scenario));

    double t = 0, d = 0;
    CHECK(ridesim_scenario_skim(scenario, 0, 8, &t, &d));
    if (t != 240.0 || d != 2400.0) {
        fprintf(stderr, "skim 0->8 = (%f, %f)\n", t, d);
        return 1;
    }

    RidesimDay *day = NULL;
    CHECK(ridesim_run_day(scenario, 5, &day));
    RidesimSystemKpi kpi;
    CHECK(ridesim_day_system_kpi(day, &kpi));
    uint64_t outcomes = kpi.n_served + kpi.n_unserved + kpi.n_opted_out + kpi.n_rejected;
    if (kpi.n_travellers != 20 || outcomes != 20) {
        fprintf(stderr, "outcomes do not partition travellers\n");
        return 1;
    }

    double cost[4] = {10, 20, 20, 10};
    int64_t row_to_col[2];
    size_t pairs = 0;
    CHECK(ridesim_assign(cost, 2, 2, row_to_col, &pairs));
    if (pairs != 2 || row_to_col[0] != 0 || row_to_col[1] != 1) {
        fprintf(stderr, "unexpected assignment\n");
        return 1;
    }

    if (ridesim_scenario_skim(scenario, 0, 99, &t, &d) != RIDESIM_STATUS_OUT_OF_RANGE ||
        strstr(ridesim_last_error(), "99") == NULL) {
        fprintf(stderr, "out-of-range node not reported\n");
        return 1;
    }

    ridesim_day_free(day);
    ridesim_scenario_free(scenario);
    printf("served %llu of %llu, mean wait %.1f s\n", (unsigned long long)kpi.n_served,
           (unsigned long long)kpi.n_travellers, isnan(kpi.mean_wait_s) ? -1.0 : kpi.mean_wait_s);
    return 0;
}
