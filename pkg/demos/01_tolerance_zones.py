"""
Zones of tolerance and the rate gap
===================================

One user watches 5 Mb/s video in two contexts. In the first it is content
with 2 Mb/s; in the second it needs 4 Mb/s for full satisfaction.
"""
import numpy as np

from zotnet import NonPersonalized, Personalized, ZoTProfile, allocate_rbs, delta_of, satisfaction_of, target_rate

relaxed = ZoTProfile(5.0, (0, 0.5, 1.0, 1.5, 2.0))
picky = ZoTProfile(5.0, (0, 3.2, 3.5, 3.8, 4.0))

# satisfaction as a step function of the provided rate
for q in np.linspace(0, 5, 11):
    print(f"{q:4.1f} Mb/s  relaxed {satisfaction_of(relaxed, q)}  picky {satisfaction_of(picky, q)}")

# the personalized policy asks only for the rate that keeps level 5
pers = Personalized(s_min=5)
for name, prof in (("relaxed", relaxed), ("picky", picky)):
    t = target_rate(pers, prof, 5.0)
    print(f"{name}: target {t} Mb/s, gap {delta_of(prof, t)} Mb/s")

# the baseline always asks for full demand; on a channel worth 3 Mb/s the picky context drops to 1
capped = np.array([[1.0, 1.0, 1.0, 0, 0, 0, 0, 0, 0]])
got = allocate_rbs([target_rate(NonPersonalized(), picky, 5.0)], capped, [5.0])[0]
print("baseline on a 3 Mb/s channel:", got.qos_p, "Mb/s, satisfaction", satisfaction_of(picky, got.qos_p))
