"""A small end-to-end run: synthetic corpus, training, evaluation, compression.

Uses the same library calls as the command line. The sizes here are
deliberately small so the script finishes in a couple of minutes; pass
larger numbers to see training progress further.

    python demos/04_desk_experiment.py [epochs] [fragments]
"""

import sys

from fracdenoise import network as net
from fracdenoise import pipeline as pl
from fracdenoise.fractional import FracConfig

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 5
n_fragments = int(sys.argv[2]) if len(sys.argv) > 2 else 1000

seeds = pl.Seeds.derive(0)
corpus = pl.synthetic_corpus(60, 2000, snr_db=0.0, seeds=seeds)
data = pl.prepare_data(corpus, pl.DataConfig(250, n_fragments, 0.2), seeds)
arch = net.ArchSpec.default()
print(f"{len(data.x_train)} training fragments, {len(data.test_fragments)} held-out tiles")

before, _ = pl.input_quality(data.test_fragments)
print(f"noisy input : SNR {before.snr_db:6.2f} dB  CC {before.cc:.3f}")

for alpha in (1.0, 1.2):
    cfg = FracConfig(alpha=alpha, epochs=epochs)
    result = pl.train_model(data, arch, cfg, rank_opt="final", seeds=seeds)
    after, _ = pl.evaluate_model(result.params, arch, data)
    ranks = {r.layer: r.optimized_rank for r in result.ranks}
    losses = result.history.train_loss
    print(f"alpha {alpha:.1f}  : SNR {after.snr_db:6.2f} dB  CC {after.cc:.3f}  "
          f"loss {losses[0]:.2f} -> {losses[-1]:.2f}  optimized ranks {ranks}")

    rows = pl.compression_sweep(result.params, arch, data, ranks, alpha, ["conv3"], [0.05, 0.5, 0.95])
    for row in rows:
        print(f"    conv3 C_R {row.c_r:.2f} (rank {row.rank:2d}): SNR {row.metrics.snr_db:6.2f} dB")
