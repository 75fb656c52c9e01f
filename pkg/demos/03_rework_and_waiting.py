"""
Rework loops and waiting times
==============================

Two questions operations teams ask first: which steps get redone, and
where do campaigns sit idle between steps.
"""
from trafficmine.diagnostics import calibrate_tau, detect_delays, detect_loops
from trafficmine.simulator import SimulationConfig, generate_log, generate_model

# Two activities are redone immediately with probability 0.3.
model = generate_model(12, 36, seed=11, num_loops=2, loop_probability=0.3)
print("injected rework:", sorted(model.loop_activities))
log = generate_log(model, SimulationConfig(num_traces=300, noise_rate=0.05, seed=11))

# %%
# The loop score is 1 for activities that never repeat and drops as
# repetitions accumulate. The threshold on the deficit is calibrated on the
# traces that contain no repeats at all.
tau, details = calibrate_tau(log)
print(f"tau = {tau:.3f} (from {details['baseline_traces']} repeat-free traces)")
for report in detect_loops(log, tau)[:5]:
    mark = "*" if report.flagged else " "
    print(f" {mark} {report.activity:<8} score={report.score:.3f} repeats in {report.oracle_repeats} traces")

# %%
# Waiting time is the gap between one event's end and the next one's start,
# clamped at zero when steps overlap.
for report in detect_delays(log, top_k=5):
    a, b = report.edge
    print(f"  {a} -> {b}: mean {report.mean_wait / 3600:.2f} h, max {report.max_wait / 3600:.2f} h "
          f"over {report.count} handovers")
