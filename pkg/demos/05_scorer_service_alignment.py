"""
Live alignment scoring through the sidecar service
==================================================

The alignment variants can fetch their inputs from a running scorer
service instead of precomputed files. This script talks to one over HTTP:
embeddings for the Emb variant, bidirectional NLI logits for Ent, and
reranker logits for CrossE — then gates the similarity matrix with each.

Start the service first (any port works; export SCORER_URL to match):

    cd scorer-service && npm install && npm run build
    node dist/main.js --port 8099
"""

import os
import sys

import numpy as np

from sementropy import (
    BackendError,
    ScorerServiceClient,
    base_similarity_matrix,
    qa_snne,
    snne,
)
from sementropy.alignment import VARIANTS, AlignmentScores

url = os.environ.get("SCORER_URL", "http://127.0.0.1:8099")
client = ScorerServiceClient(url)

try:
    health = client.health()
except BackendError as exc:
    print(f"scorer service not reachable: {exc}")
    print("start it as shown in the module docstring, then rerun this script")
    sys.exit(0)

print(f"service at {url} is healthy; engines: {health['models']}")

# --- one record: a question, three on-topic answers, two drifting ones -------
question = "what instrument is dissecting the hepatocystic triangle?"
samples = [
    "the monopolar hook is dissecting the hepatocystic triangle",
    "a monopolar hook dissects the triangle",
    "the hook dissects tissue in the hepatocystic triangle",
    "the patient is positioned supine on the table",
    "irrigation fluid fills the field",
]

s_text = base_similarity_matrix(samples)
base = snne(s_text)
print(f"\nungated SNNE {base:+.4f}")

# --- each variant reduces its scorer outputs to one alpha per answer ----------
print(f"\n{'variant':<8} {'alphas':<42} {'QA-SNNE':>8}")
for variant in VARIANTS:
    alphas = client.alphas_for_record(question, samples, variant)
    align = AlignmentScores.from_alpha(variant, alphas, beta=10.0)
    gated = qa_snne(s_text, align, weight_scale="softmax_times_n")
    shown = np.array2string(np.round(alphas, 2), separator=", ")
    print(f"{variant:<8} {shown:<42} {gated:>+8.4f}")

print("\nanswers that ignore the question get low weight in every variant,")
print("so the gated score tracks the on-topic consensus only")
