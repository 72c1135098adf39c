"""Checkpointing Q-networks and reusing them after the partition changes."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from irs.nn import CheckpointError, Mlp, MlpSpec, load_checkpoint
from irs.solvers.common import NetQ


def save_checkpoint(q: NetQ, env, path: Union[str, Path]) -> None:
    q.online.save(path, meta={"inputs": env.input_labels(), "outputs": env.action_labels()})


def warm_start(checkpoint: Union[str, Path, tuple[Mlp, dict]], env, seed: int = 0) -> NetQ:
    """Build a Q-network for ``env`` from a saved one.

    Same input/output labels: weights load verbatim. Otherwise the new net is
    initialised fresh and every input row and output column whose label
    exists in the checkpoint is copied over; hidden layers are copied whole.
    """
    old, meta = load_checkpoint(checkpoint) if not isinstance(checkpoint, tuple) else checkpoint
    old_in = list(meta.get("inputs", []))
    old_out = list(meta.get("outputs", []))
    if len(old_in) != old.spec.input_size or len(old_out) != old.spec.output_size:
        raise CheckpointError("checkpoint labels do not match its network shape")
    new_in, new_out = env.input_labels(), env.action_labels()
    if new_in == old_in and new_out == old_out:
        return NetQ(old)

    spec = MlpSpec(len(new_in), old.spec.hidden_size, old.spec.layers, len(new_out), old.spec.learning_rate)
    net = Mlp.init(spec, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xD0,))))
    rows = [(k, old_in.index(lbl)) for k, lbl in enumerate(new_in) if lbl in old_in]
    cols = [(k, old_out.index(lbl)) for k, lbl in enumerate(new_out) if lbl in old_out]
    last = len(net.weights) - 1
    for layer in range(len(net.weights)):
        w_new, w_old = net.weights[layer], old.weights[layer]
        b_new, b_old = net.biases[layer], old.biases[layer]
        if layer != last:
            b_new[:] = b_old
        else:
            for k, o in cols:
                b_new[k] = b_old[o]
        if 0 < layer < last:
            w_new[:] = w_old
        elif layer == 0 and layer != last:
            for k, o in rows:
                w_new[k, :] = w_old[o, :]
        elif layer == last and layer != 0:
            for k, o in cols:
                w_new[:, k] = w_old[:, o]
        else:
            for k, o in rows:
                for kc, oc in cols:
                    w_new[k, kc] = w_old[o, oc]
    return NetQ(net)
