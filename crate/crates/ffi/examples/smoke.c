#include <stdio.h>
#include "lbsteer.h"
int main(void) {
    LbsSim *s = NULL;
    if (lbs_sim_from_text("dims = [16, 16]\ntau = 0.8\nwalls = true\n", 0, &s) != LBS_STATUS_OK) return 1;
    if (lbs_sim_step(s, 10) != LBS_STATUS_OK) return 2;
    LbsFrameShape shape;
    float buf[256];
    if (lbs_sim_render(s, 1, 2, 0, buf, 256, &shape) != LBS_STATUS_OK) return 3;
    printf("%llu %u %u %g\n", (unsigned long long)lbs_sim_iteration(s), shape.width, shape.height, buf[17]);
    lbs_sim_free(s);
    return lbs_sim_from_text("tau = 0.1\n", 0, &s) == LBS_STATUS_SCENARIO && lbs_last_error() ? 0 : 4;
}
