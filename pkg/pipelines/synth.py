# pipelines/synth.py
from __future__ import annotations

from pathlib import Path

from config.errors import InvalidInputError
from problems.eeg import synth_eeg
from problems.labeling import DEFAULT_BETA, synth_labeling
from storage.bundle import save_bundle

FAMILIES = ("eeg", "labeling")


def cmd_synth(args) -> dict:
    """Write a seeded synthetic bundle to --out (default synth/<family>-<seed>)."""
    family = getattr(args, "family", None) or "eeg"
    if family not in FAMILIES:
        raise InvalidInputError(f"unknown family {family!r}; use one of {FAMILIES}")
    seed = int(getattr(args, "seed", 0) or 0)
    vertices = getattr(args, "vertices", None)

    if family == "eeg":
        n = int(vertices or 50)
        obs = int(getattr(args, "observations", None) or max(1, (2 * n) // 5))
        support = getattr(args, "support", None)
        support = int(support) if support is not None else max(1, n // 5)
        noise = getattr(args, "noise", None)
        instance = synth_eeg(seed, n, obs, support, noise=float(noise) if noise is not None else 0.01)
    else:
        n = int(vertices or 100)
        flip = getattr(args, "flip", None)
        instance = synth_labeling(seed, n, int(getattr(args, "labels", None) or 3),
                                  float(flip) if flip is not None else 0.2,
                                  beta=float(getattr(args, "beta", None) or DEFAULT_BETA))

    out = Path(getattr(args, "out", None) or Path("synth") / f"{family}-{seed}")
    save_bundle(out, instance, seed)
    report = {"family": family, "name": instance.name, "seed": seed, "bundle": str(out),
              "vertices": instance.graph.num_vertices, "edges": instance.graph.num_edges}
    return report
