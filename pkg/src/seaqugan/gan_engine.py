"""Adversarial training of classical and quantum generators against one discriminator.

Labels: real = 1, fake = 0. Each batch does one discriminator Adam step on
``mean BCE`` over the real batch and an equally sized generated batch, then
one generator Adam step on the non-saturating loss ``mean BCE(D(G(z)), 1)``.
Generator outputs are renormalized to sum one and the gradient flows
through that renormalization.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import neural_core as nc
from .evaluation import pooled_weight_std, valid_mask
from .quantum_sim import (
    AnsatzFamily,
    AnsatzSpec,
    adjoint_vjp,
    final_states,
    param_count,
    param_shift_jacobian,
    run_generator_circuit,
    zero_marginals,
)

log = logging.getLogger(__name__)

LATENT_DIM = 6
CLASSICAL_OUTPUT_BIAS = 2.0

GRAD_METHODS = ("adjoint", "param_shift")


@dataclass(frozen=True)
class GeneratorConfig:
    """Classical MLP generator when ``ansatz`` is None, otherwise a quantum circuit."""

    ansatz: AnsatzSpec | None = None
    latent_dim: int = LATENT_DIM
    embed_axis: str = "ry"
    grad_method: str = "adjoint"
    classical_output_bias: float = CLASSICAL_OUTPUT_BIAS

    def __post_init__(self):
        if self.grad_method not in GRAD_METHODS:
            raise ValueError(f"grad_method must be one of {GRAD_METHODS}, got {self.grad_method!r}")
        if self.ansatz is not None and self.ansatz.n_qubits != self.latent_dim:
            raise ValueError("quantum generator needs one qubit per latent dimension")

    @property
    def kind(self) -> str:
        return "classical" if self.ansatz is None else "quantum"

    @property
    def output_dim(self) -> int:
        return 6 if self.ansatz is None else self.ansatz.n_qubits

    @property
    def n_params(self) -> int:
        if self.ansatz is None:
            return nc.count_params((self.latent_dim, 10, 6))
        return param_count(self.ansatz)


MODELS = {
    "classical": GeneratorConfig(),
    "qugan36": GeneratorConfig(AnsatzSpec(AnsatzFamily.RX_FIXED_Y, 5)),
    "qugan66": GeneratorConfig(AnsatzSpec(AnsatzFamily.RX_FIXED_Y, 10)),
    "qugan72": GeneratorConfig(AnsatzSpec(AnsatzFamily.RX_RY, 5)),
    "qugan132": GeneratorConfig(AnsatzSpec(AnsatzFamily.RX_RY, 10)),
}
EXPECTED_PARAMS = {"classical": 136, "qugan36": 36, "qugan66": 66, "qugan72": 72, "qugan132": 132}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 32
    lr_disc: float = 0.3
    lr_gen: float = 0.001
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    eval_samples: int = 1000
    eval_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("batch_size", "eval_samples", "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.lr_disc <= 0 or self.lr_gen <= 0:
            raise ValueError("learning rates must be positive")


@dataclass(frozen=True)
class MetricsRecord:
    seed: int
    epoch: int
    valid_count: int
    weight_std: float
    gen_loss: float
    disc_loss: float


METRIC_FIELDS = ("seed", "epoch", "valid_count", "weight_std", "gen_loss", "disc_loss")


def sample_latent(rng: np.random.Generator, batch: int, dim: int = LATENT_DIM) -> np.ndarray:
    return rng.standard_normal((batch, dim))


def init_generator_params(config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    if config.ansatz is None:
        return nc.init_params((config.latent_dim, 10, 6), rng, output_bias=config.classical_output_bias)
    return rng.uniform(-np.pi, np.pi, size=param_count(config.ansatz))


def classical_model(config: GeneratorConfig, params) -> nc.MlpModel:
    return nc.MlpModel((config.latent_dim, 10, 6), params, nc.Activation.LEAKY_RELU, nc.Activation.RELU)


def renormalize(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale rows to sum one; all-zero rows become uniform and are flagged."""
    raw = np.atleast_2d(raw)
    total = raw.sum(axis=1, keepdims=True)
    degenerate = total[:, 0] <= 0
    safe = np.where(degenerate[:, None], 1.0, total)
    weights = np.where(degenerate[:, None], 1.0 / raw.shape[1], raw / safe)
    return weights, degenerate


def renormalize_vjp(raw: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pull ``upstream`` (w.r.t. normalized weights) back to the raw outputs.

    d(w_i / S)/d w_j = delta_ij / S - w_i / S**2; degenerate rows get zero.
    """
    raw = np.atleast_2d(raw)
    upstream = np.atleast_2d(upstream)
    total = raw.sum(axis=1, keepdims=True)
    ok = total > 0
    safe = np.where(ok, total, 1.0)
    grad = upstream / safe - np.sum(upstream * raw, axis=1, keepdims=True) / safe**2
    return np.where(ok, grad, 0.0)


def raw_output(config: GeneratorConfig, params, z) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != config.latent_dim:
        raise ValueError(f"latent vectors must have {config.latent_dim} entries, got shape {z.shape}")
    if config.ansatz is None:
        out, _ = nc.forward(classical_model(config, params), z)
        return out
    return run_generator_circuit(config.ansatz, np.asarray(params, dtype=float), z, config.embed_axis)


def generate(config: GeneratorConfig, params, z) -> np.ndarray:
    """Normalized edge weights for one latent vector ``(6,)`` or a batch ``(B, 6)``."""
    single = np.ndim(z) == 1
    weights, degenerate = renormalize(raw_output(config, params, z))
    if degenerate.any():
        log.debug("%d all-zero generator outputs replaced by uniform weights", int(degenerate.sum()))
    return weights[0] if single else weights


def generator_gradient(config: GeneratorConfig, params, z, upstream) -> np.ndarray:
    """Gradient of ``sum(upstream * generate(z))`` w.r.t. the flat generator parameters."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    if upstream.shape != (z.shape[0], config.output_dim):
        raise ValueError(f"upstream shape {upstream.shape} does not match batch of {z.shape[0]}")
    params = np.asarray(params, dtype=float)
    if params.shape != (config.n_params,):
        raise ValueError(f"expected {config.n_params} generator parameters, got shape {params.shape}")

    if config.ansatz is None:
        model = classical_model(config, params)
        raw, cache = nc.forward(model, z)
        return nc.backward(model, cache, renormalize_vjp(raw, upstream)).flat()

    spec = config.ansatz
    states = final_states(spec, params, z, config.embed_axis)
    up_raw = renormalize_vjp(zero_marginals(states, spec.n_qubits), upstream)
    if config.grad_method == "adjoint":
        return adjoint_vjp(spec, params, z, up_raw, config.embed_axis, states=states)
    jac = param_shift_jacobian(config.ansatz, params, z, config.embed_axis)
    return np.einsum("bn,bnp->p", up_raw, jac)


@dataclass
class GanState:
    gen_config: GeneratorConfig
    disc: nc.MlpModel
    gen_params: np.ndarray
    disc_opt: nc.AdamState
    gen_opt: nc.AdamState
    fallback_count: int = 0

    @classmethod
    def initialize(cls, gen_config: GeneratorConfig, train: TrainConfig, rng: np.random.Generator) -> "GanState":
        disc = nc.build_discriminator(rng)
        gen_params = init_generator_params(gen_config, rng)
        return cls(
            gen_config,
            disc,
            gen_params,
            nc.AdamState.zeros(disc.n_params, train.lr_disc),
            nc.AdamState.zeros(len(gen_params), train.lr_gen),
        )


def _disc_objective(state: GanState, real: np.ndarray, fake: np.ndarray):
    x = np.concatenate([real, fake])
    y = np.concatenate([np.ones(len(real)), np.zeros(len(fake))])
    d, cache = nc.forward(state.disc, x)
    loss, dloss = nc.bce_loss(d[:, 0], y)
    return float(loss.mean()), cache, (dloss / len(x))[:, None]


def losses(state: GanState, real_batch: np.ndarray, rng: np.random.Generator) -> tuple[float, float]:
    """Current discriminator and generator losses on one batch, without updating."""
    cfg = state.gen_config
    fake = generate(cfg, state.gen_params, sample_latent(rng, len(real_batch), cfg.latent_dim))
    disc_loss, _, _ = _disc_objective(state, real_batch, fake)
    fake = generate(cfg, state.gen_params, sample_latent(rng, len(real_batch), cfg.latent_dim))
    d, _ = nc.forward(state.disc, fake)
    gen_loss, _ = nc.bce_loss(d[:, 0], 1.0)
    return disc_loss, float(gen_loss.mean())


def train_step(state: GanState, real_batch: np.ndarray, rng: np.random.Generator) -> tuple[float, float]:
    """One discriminator update followed by one generator update; mutates ``state``."""
    cfg = state.gen_config
    batch = len(real_batch)

    z = sample_latent(rng, batch, cfg.latent_dim)
    raw = raw_output(cfg, state.gen_params, z)
    fake, degenerate = renormalize(raw)
    state.fallback_count += int(degenerate.sum())
    disc_loss, cache, upstream = _disc_objective(state, real_batch, fake)
    grads = nc.backward(state.disc, cache, upstream).flat()
    new_params, state.disc_opt = nc.adam_step(state.disc_opt, state.disc.params, grads)
    state.disc = state.disc.with_params(new_params)

    z = sample_latent(rng, batch, cfg.latent_dim)
    fake = generate(cfg, state.gen_params, z)
    d, cache = nc.forward(state.disc, fake)
    loss, dloss = nc.bce_loss(d[:, 0], 1.0)
    input_grad = nc.backward(state.disc, cache, (dloss / batch)[:, None]).input_grad
    grads = generator_gradient(cfg, state.gen_params, z, input_grad)
    state.gen_params, state.gen_opt = nc.adam_step(state.gen_opt, state.gen_params, grads)
    return disc_loss, float(loss.mean())


def evaluate(state: GanState, rng: np.random.Generator, n: int) -> tuple[np.ndarray, int, float]:
    samples = generate(state.gen_config, state.gen_params, sample_latent(rng, n, state.gen_config.latent_dim))
    return samples, int(valid_mask(samples).sum()), pooled_weight_std(samples)


@dataclass
class SeedResult:
    seed: int
    records: list[MetricsRecord]
    final_samples: np.ndarray
    state: GanState = field(repr=False)


def train_seed(train: TrainConfig, gen_config: GeneratorConfig, data: np.ndarray, seed: int) -> SeedResult:
    """Train one seed; the metric row for epoch ``e`` is taken after ``e`` full epochs."""
    data = np.asarray(data, dtype=float)
    if len(data) == 0:
        raise ValueError("empty training dataset")
    init_rng, train_rng, eval_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    state = GanState.initialize(gen_config, train, init_rng)
    batch = min(train.batch_size, len(data))
    n_batches = len(data) // batch

    records = []
    disc_loss, gen_loss = losses(state, data[:batch], eval_rng)
    samples, n_valid, std = evaluate(state, eval_rng, train.eval_samples)
    records.append(MetricsRecord(seed, 0, n_valid, std, gen_loss, disc_loss))

    for epoch in range(1, train.epochs + 1):
        order = train_rng.permutation(len(data))
        step_losses = np.empty((n_batches, 2))
        for b in range(n_batches):
            real = data[order[b * batch : (b + 1) * batch]]
            step_losses[b] = train_step(state, real, train_rng)
        if epoch % train.eval_every == 0 or epoch == train.epochs:
            disc_loss, gen_loss = step_losses.mean(axis=0)
            samples, n_valid, std = evaluate(state, eval_rng, train.eval_samples)
            records.append(MetricsRecord(seed, epoch, n_valid, std, float(gen_loss), float(disc_loss)))
            log.info(
                "seed %d epoch %d: valid %d/%d std %.4f G %.4f D %.4f",
                seed, epoch, n_valid, train.eval_samples, std, gen_loss, disc_loss,
            )
    if state.fallback_count:
        log.warning("seed %d: %d degenerate generator outputs replaced by uniform weights", seed, state.fallback_count)
    return SeedResult(seed, records, samples, state)


def train(train_config: TrainConfig, gen_config: GeneratorConfig, data) -> list[SeedResult]:
    return [train_seed(train_config, gen_config, data, seed) for seed in train_config.seeds]


def average_records(records: list[MetricsRecord]) -> list[dict]:
    """Seed-averaged metrics per epoch (arithmetic mean across seeds)."""
    by_epoch: dict[int, list[MetricsRecord]] = {}
    for r in records:
        by_epoch.setdefault(r.epoch, []).append(r)
    rows = []
    for epoch in sorted(by_epoch):
        group = by_epoch[epoch]
        row = {"epoch": epoch, "n_seeds": len(group)}
        for name in ("valid_count", "weight_std", "gen_loss", "disc_loss"):
            row[name] = float(np.mean([getattr(r, name) for r in group]))
        rows.append(row)
    return rows


def run_metadata(gen_config: GeneratorConfig, train_config: TrainConfig) -> dict:
    meta = {
        "generator_kind": gen_config.kind,
        "generator_params": gen_config.n_params,
        "latent_dim": gen_config.latent_dim,
        "train": asdict(train_config),
        "labels": {"real": 1, "fake": 0},
        "generator_objective": "non-saturating BCE, y=1 on generated samples",
        "update_schedule": "one discriminator step then one generator step per batch",
        "last_partial_batch": "dropped",
        "discriminator": {"layers": [6, 16, 1], "params": 129, "hidden": "LeakyReLU", "output": "Sigmoid"},
        "leaky_relu_slope": nc.LEAKY_SLOPE,
        "bce_clamp": nc.BCE_CLAMP,
        "adam": {"beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
        "mlp_init": "weights U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases 0",
        "renormalization_in_gradient": True,
    }
    if gen_config.ansatz is None:
        meta["classical_output_bias_init"] = gen_config.classical_output_bias
        meta["generator_layers"] = [gen_config.latent_dim, 10, 6]
    else:
        meta["ansatz"] = {
            "family": gen_config.ansatz.family.value,
            "layers": gen_config.ansatz.layers,
            "n_qubits": gen_config.ansatz.n_qubits,
            "rotation_blocks": gen_config.ansatz.layers + 1,
            "entanglement": "circular CNOT ring i -> i+1 mod n",
        }
        meta["embedding_axis"] = gen_config.embed_axis
        meta["quantum_init"] = "uniform(-pi, pi)"
        meta["grad_method"] = gen_config.grad_method
    return meta


# Quantum parameter file, little-endian: b"QPV1", uint32 count, count x float64.
QPV_MAGIC = b"QPV1"


def save_quantum_params(params, path) -> None:
    params = np.asarray(params, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(QPV_MAGIC + struct.pack("<I", len(params)) + params.tobytes())


def load_quantum_params(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != QPV_MAGIC:
        raise ValueError(f"{path}: not a quantum parameter file")
    (count,) = struct.unpack_from("<I", raw, 4)
    return np.frombuffer(raw, dtype="<f8", count=count, offset=8).astype(float)
