"""End-to-end: generate a synthetic dataset whose age signal is split
between the face and body regions, train the dual-input model with input
dropout, then evaluate in the three test modes. Using both views beats
either one alone, because each carries only half the information.

Run: python demos/05_train_and_eval.py            (a few minutes)
     python demos/05_train_and_eval.py --quick    (sanity run, no claims)
"""

import sys
import tempfile
import time
from pathlib import Path

from agegender import tiny_config
from agegender.data import generate_synthetic_dataset
from agegender.metrics import format_report
from agegender.train import evaluate, train

quick = "--quick" in sys.argv
root = Path(tempfile.mkdtemp(prefix="agegender_demo_"))

print("== data: age split across views ==")
train_manifest = generate_synthetic_dataset(root / "train", 192, seed=2, mode="split")
eval_manifest = generate_synthetic_dataset(root / "eval", 96, seed=3, mode="split")
print(f"train manifest: {train_manifest}")

config = tiny_config(
    learning_rate=2e-3,
    weight_decay=1e-4,
    warmup_steps=50,
    batch_size=16,
    max_steps=60 if quick else 1100,
    log_every=10 if quick else 100,
    drop_rate=0.0,
    drop_path_rate=0.0,
    body_input_dropout=0.15,
    face_input_dropout=0.35,
    jitter=0.0,
    erase_prob=0.0,
    hflip_prob=0.0,
    seed=0,
)

print(f"\n== training {config.max_steps} steps ==")
start = time.perf_counter()
result = train(train_manifest, config, root / "run")
print(f"done in {time.perf_counter() - start:.0f}s; checkpoint {result.checkpoint_path}")
for line in result.log_lines[-3:]:
    print(" ", line)

print("\n== evaluation: face / body / face&body ==")
for mode in ("face", "body", "both"):
    report, skipped = evaluate(eval_manifest, result.checkpoint_path, mode=mode)
    print(f"mode={mode:5s}  MAE {report['mae']:6.2f}y   CS@5 {report['cs@5']:5.1f}%   "
          f"gender acc {report['gender_acc']:.1f}%   (skipped {skipped})")

print("\nfull report for face&body mode:")
report, _ = evaluate(eval_manifest, result.checkpoint_path, mode="both")
print(format_report(report))
