"""
Personalized against non-personalized allocation
================================================

Train on a development day, then replay the same users and channel under
both policies and compare provided rate and satisfaction hour by hour.
The full day takes under a minute; HOURS trims it for a quick look.
"""
from zotnet import SimulationConfig, compare, run_development, run_production
from zotnet.pipeline import build_world

HOURS = 4

config = SimulationConfig(duration_s=HOURS * 3600)
dev = run_development(config)
print("development:", dev.report)

world = build_world(config)
pers = run_production(config, dev.model, "personalized", world)
base = run_production(config, None, "baseline", world)

report = compare(pers.records, base.records, config.ts_len_s, config.demands, config.warmup_s)
print(f"saved {report.total_saved_mbits:.0f} Mbit ({100 * report.saved_fraction:.1f}% of baseline)")
print(f"satisfaction after warm-up: personalized {pers.summary.avg_satisfaction_after_warmup:.3f}, "
      f"baseline {base.summary.avg_satisfaction_after_warmup:.3f}")
print(report.hourly.round(2).to_string(index=False))
