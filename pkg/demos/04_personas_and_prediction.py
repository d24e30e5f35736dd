"""
Personas, clustering and the two-phase predictor
================================================

Generate labelled samples for four personas, check that k-means finds them
again without labels, then train the predictor and query it.
"""
import numpy as np
from sklearn.metrics import adjusted_rand_score

from zotnet import cluster_personas, default_personas, emit_dataset, train
from zotnet.predictor import preprocess_trace
from zotnet.synth import generate_trace

personas = default_personas(tolerance_noise_std=0.0)
df = emit_dataset(personas, users_per_persona=3, duration=6 * 3600, seed=0)
print(df.head())
print(df.groupby("persona_id")["satisfaction"].mean())

assign, _ = cluster_personas(df, 4, seed=0)
truth = df.groupby("user_id")["persona_id"].first()
print("adjusted Rand index:", adjusted_rand_score(truth[sorted(assign)], [assign[u] for u in sorted(assign)]))

model, report = train(df, seed=0, min_bucket_samples=10)
print(report)

# a fresh user of persona 2; how much video rate keeps it at level 4 or more?
trace = generate_trace(personas[2], 600, seed=42, start_time=20 * 3600)
feats = preprocess_trace(trace)
probs = model.predict_persona(feats)
print("mean persona probabilities:", np.round(probs.mean(axis=0), 3))
prof = model.predict_profile(feats[0], probs[0], "video")
print("predicted thresholds for video:", np.round(prof.adequate, 3))
