"""End-to-end protocol runs: entanglement-based (ppp) and prepare-and-measure (pm).

Runs never materialize tensor-power states.  A per-copy *pattern code*
(which X/Z flips hit Bob's qubit) selects one of at most four single-copy
component states; every measurement statistic is computed once per
(component, observable) pair and the per-copy outcomes are then sampled in
bulk.  This keeps n = 1e5-scale runs in milliseconds while remaining exactly
faithful to the iid component model.

Every run returns a :class:`Transcript` whose JSON serialization is
byte-identical across reruns with the same config and seed (fixed RNG draw
order, sorted keys, no wall-clock or environment values).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import (
    BoundParams,
    binary_entropy,
    choose_params,
    composable_insecurity,
    key_rate,
    protocol_failure_bound,
    relaxation_budget,
)
from .channels import PauliNoiseModel, pauli_op
from .ecpa import bits_to_hex, error_correct, pa_length, toeplitz_apply, toeplitz_seed
from .estimation import (
    EstimationResult,
    ProductDecomposition,
    decompose_two_local,
    estimate_eps_z_locc,
    joint_outcome_table,
    local_eigensystem,
)
from .linalg import basis_ket, kron_all, proj
from .states import DensityState, KEY_SHIELD_LAYOUT, P_STAR, rho_h
from .twist import TwistingOp, build_u_h, gamma_x, gamma_z, identity_twisting, make_pdit

__all__ = [
    "SourceSpec",
    "ProtocolConfig",
    "Transcript",
    "run_ppp",
    "run_pm",
    "pm_signal_ensemble",
    "twisting_by_name",
]

TRANSCRIPT_SCHEMA = 1


def twisting_by_name(name: str) -> TwistingOp:
    """Resolve a twisting referenced by name in configs ("identity" or "u_h")."""
    if name == "identity":
        return identity_twisting(2, 4)
    if name == "u_h":
        return build_u_h()
    raise ValueError(f"unknown twisting {name!r}")


def _ancilla_by_name(name: str) -> np.ndarray:
    if name == "comp00":
        return proj(kron_all(basis_ket(0, 2), basis_ket(0, 2)))
    if name == "maximally_mixed":
        return np.eye(4, dtype=complex) / 4.0
    raise ValueError(f"unknown ancilla {name!r}")


@dataclass(frozen=True)
class SourceSpec:
    """What single-copy state the source emits.

    kind "rho_h": the hiding family at (p, kappa).  kind "pbit": a twisted
    maximally-entangled core make_pdit(twisting, ancilla), optionally hit by
    an X/Z pattern noise model on Bob's key qubit.
    """

    kind: str = "rho_h"
    p: float = P_STAR
    kappa: float = 0.0
    twisting: str = "u_h"
    ancilla: str = "comp00"
    noise: PauliNoiseModel | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("rho_h", "pbit"):
            raise ValueError(f"unknown source kind {self.kind!r}")

    def base_state(self) -> DensityState:
        if self.kind == "rho_h":
            return rho_h(self.p, self.kappa)
        return make_pdit(twisting_by_name(self.twisting), _ancilla_by_name(self.ancilla))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "kappa": self.kappa,
            "twisting": self.twisting,
            "ancilla": self.ancilla,
            "noise": None if self.noise is None else json.loads(self.noise.to_json()),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SourceSpec":
        noise = d.get("noise")
        return cls(
            kind=d.get("kind", "rho_h"),
            p=float(d.get("p", P_STAR)),
            kappa=float(d.get("kappa", 0.0)),
            twisting=d.get("twisting", "u_h"),
            ancilla=d.get("ancilla", "comp00"),
            noise=None if noise is None else PauliNoiseModel.from_json(json.dumps(noise)),
        )


@dataclass(frozen=True)
class ProtocolConfig:
    """Run parameters shared by the ppp and pm flows.

    m_x / m_prime left as None are filled from the parameter solver; at desk
    scale the solver's demands are astronomically infeasible, so simulated
    runs are expected to set both explicitly.  For pm runs m_prime acts as
    the minimum acceptable per-group matched count (the estimator uses every
    matched sample it gets).
    """

    n: int
    seed: int
    s: int = 40
    delta: float = 0.05
    source: SourceSpec = field(default_factory=SourceSpec)
    eve: PauliNoiseModel | None = None
    candidates: tuple[str, ...] = ("identity", "u_h")
    m_x: int | None = None
    m_prime: int | None = None
    ec_block: int = 16
    beta_b: float | None = None
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if not self.candidates:
            raise ValueError("need at least one candidate twisting")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "s": self.s,
            "delta": self.delta,
            "source": self.source.to_dict(),
            "eve": None if self.eve is None else json.loads(self.eve.to_json()),
            "candidates": list(self.candidates),
            "m_x": self.m_x,
            "m_prime": self.m_prime,
            "ec_block": self.ec_block,
            "beta_b": self.beta_b,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolConfig":
        eve = d.get("eve")
        if isinstance(eve, (int, float)) and not isinstance(eve, bool):
            # bare number = iid bit-flip-only intercept strength
            eve = {"eps_x": float(eve), "eps_z": 0.0}
        return cls(
            n=int(d["n"]),
            seed=int(d["seed"]),
            s=int(d.get("s", 40)),
            delta=float(d.get("delta", 0.05)),
            source=SourceSpec.from_dict(d.get("source", {})),
            eve=None if eve is None else PauliNoiseModel.from_json(json.dumps(eve)),
            candidates=tuple(d.get("candidates", ("identity", "u_h"))),
            m_x=d.get("m_x"),
            m_prime=d.get("m_prime"),
            ec_block=int(d.get("ec_block", 16)),
            beta_b=d.get("beta_b"),
            threads=d.get("threads"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProtocolConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class Transcript:
    """Complete, deterministic record of one protocol run."""

    schema: int
    protocol: str
    config: dict
    events: list
    estimates: dict
    security: dict
    key: dict
    abort: bool
    abort_reason: str | None

    def to_json(self) -> str:
        payload = {
            "schema": self.schema,
            "protocol": self.protocol,
            "config": self.config,
            "events": self.events,
            "estimates": self.estimates,
            "security": self.security,
            "key": self.key,
            "abort": self.abort,
            "abort_reason": self.abort_reason,
        }
        return json.dumps(_jsonsafe(payload), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        d = json.loads(text)
        return cls(
            schema=d["schema"],
            protocol=d["protocol"],
            config=d["config"],
            events=d["events"],
            estimates=d["estimates"],
            security=d["security"],
            key=d["key"],
            abort=d["abort"],
            abort_reason=d["abort_reason"],
        )


def _jsonsafe(obj):
    """Replace non-finite floats by None so the transcript stays valid JSON."""
    if isinstance(obj, dict):
        return {k: _jsonsafe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonsafe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if (math.isnan(x) or math.isinf(x)) else x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --- single-copy component model ---------------------------------------------


def _pattern_codes(config: ProtocolConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-copy pattern code 2x + z in {0,1,2,3} from source noise XOR Eve."""
    n = config.n
    x = np.zeros(n, dtype=np.uint8)
    z = np.zeros(n, dtype=np.uint8)
    if config.source.kind == "pbit" and config.source.noise is not None:
        sx, sz = config.source.noise.sample_pattern(n, rng)
        x ^= sx
        z ^= sz
    if config.eve is not None:
        ex, ez = config.eve.sample_pattern(n, rng)
        x ^= ex
        z ^= ez
    return (2 * x + z).astype(np.uint8)


def _component_states(config: ProtocolConfig) -> list[DensityState]:
    """The four pattern-conjugated single-copy states, indexed by code 2x+z."""
    base = config.source.base_state()
    out = []
    for code in range(4):
        xf, zf = code >> 1, code & 1
        if xf or zf:
            out.append(base.conjugate_by(pauli_op(xf, zf), ["B"]))
        else:
            out.append(base)
    return out


@dataclass
class _ObsTables:
    """Cached per-component measurement statistics."""

    zz_plus: np.ndarray  # (4,) probability that the sigma_z sigma_z product is +1
    joint16: np.ndarray  # (4, 16) computational joint outcome distribution
    group_plus: dict  # (ja, jb) -> (4,) probability that the product is +1/4


def _build_tables(
    components: list[DensityState], support: list[tuple[int, int]], dec: ProductDecomposition
) -> _ObsTables:
    gz = gamma_z(KEY_SHIELD_LAYOUT)
    zz_plus = np.array([(1.0 + c.expect(gz)) / 2.0 for c in components])
    zz_label_a = dec.labels_a.index("ZZ")
    zz_label_b = dec.labels_b.index("ZZ")
    joint16 = np.zeros((4, 16))
    for i, c in enumerate(components):
        probs, _ = joint_outcome_table(c, dec, zz_label_a, zz_label_b)
        joint16[i] = probs
    group_plus = {}
    for ja, jb in support:
        arr = np.zeros(4)
        for i, c in enumerate(components):
            probs, prods = joint_outcome_table(c, dec, ja, jb)
            arr[i] = float(probs[prods > 0].sum())
        group_plus[(ja, jb)] = np.clip(arr, 0.0, 1.0)
    return _ObsTables(zz_plus=np.clip(zz_plus, 0.0, 1.0), joint16=joint16, group_plus=group_plus)


def _sample_signs(p_plus: np.ndarray, codes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """±1 outcomes with per-copy success probability p_plus[code]."""
    u = rng.random(codes.size)
    return np.where(u < p_plus[codes], 1.0, -1.0)


def _sample_categorical(
    probs_by_code: np.ndarray, codes: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Category index per copy from the per-code distribution (one uniform each)."""
    cum = np.cumsum(probs_by_code, axis=1)
    cum = cum / cum[:, -1:]
    u = rng.random(codes.size)
    return (u[:, None] > cum[codes]).sum(axis=1)


def _candidate_decompositions(names: Sequence[str]) -> dict[str, ProductDecomposition]:
    out = {}
    for name in names:
        out[name] = decompose_two_local(gamma_x(twisting_by_name(name)), KEY_SHIELD_LAYOUT)
    return out


def _support_union(decomps: dict[str, ProductDecomposition]) -> list[tuple[int, int]]:
    pairs: set[tuple[int, int]] = set()
    for dec in decomps.values():
        pairs.update(dec.support())
    return sorted(pairs)


def _pair_label(dec: ProductDecomposition, ja: int, jb: int) -> str:
    return f"{dec.labels_a[ja]}|{dec.labels_b[jb]}"


def _security_block(config: ProtocolConfig, m_x: int, m_z: int) -> dict:
    r = relaxation_budget(config.s, config.n)
    block: dict = {"r": r}
    try:
        params = BoundParams(
            n=config.n, m_x=m_x, m_z=m_z, delta=config.delta, r=r,
            d=2, d_prime=4, s=config.s, beta_b=config.beta_b,
        )
        fb = protocol_failure_bound(params)
        block["bound_params"] = params.to_dict()
        block["log2_f"] = fb.log2_f
        block["f"] = fb.f
        block["vacuous"] = fb.vacuous
        block["beta_b"] = params.beta
        block["insecurity"] = composable_insecurity(fb.f, params.beta)
    except ValueError as exc:
        block["bound_params"] = None
        block["vacuous"] = True
        block["note"] = str(exc)
    return block


def _resolve_budgets(config: ProtocolConfig, n_groups: int) -> tuple[int | None, int | None, str]:
    """Fill m_x / m_prime from the solver when unset; '' message on success."""
    m_x, m_prime = config.m_x, config.m_prime
    if m_x is None or m_prime is None:
        sol = choose_params(config.s, config.delta, 2, 4, n=config.n)
        if not sol.feasible:
            return None, None, (
                "parameters_infeasible: "
                f"binding constraint {sol.binding_constraint!r}; {sol.message or 'see solver margins'}"
            )
        m_x = m_x if m_x is not None else sol.m_x
        m_prime = m_prime if m_prime is not None else sol.m_prime
    if m_x < 1 or m_prime < 1:
        return None, None, "parameters_infeasible: m_x and m_prime must be positive"
    if m_x + n_groups * m_prime >= config.n:
        return None, None, (
            f"parameters_infeasible: m_x + {n_groups}*m_prime = "
            f"{m_x + n_groups * m_prime} leaves no key copies out of n = {config.n}"
        )
    return m_x, m_prime, ""


def _abort_transcript(config: ProtocolConfig, protocol: str, reason: str) -> Transcript:
    return Transcript(
        schema=TRANSCRIPT_SCHEMA,
        protocol=protocol,
        config=config.to_dict(),
        events=[{"event": "configure", "n": config.n, "seed": config.seed},
                {"event": "abort", "reason": reason}],
        estimates={},
        security={},
        key={"alice_hex": "", "bob_hex": "", "final_len": 0, "raw_len": 0,
             "agreement": None, "final_key_empty": True, "ec": None},
        abort=True,
        abort_reason=reason,
    )


def _estimate_block(
    records: dict,
    decomps: dict[str, ProductDecomposition],
    eps_x_hat: float,
    config: ProtocolConfig,
    m_x: int,
    m_z: int,
) -> tuple[dict, float, float]:
    """Shared estimation/abort logic; returns (estimates dict, eps_z_hat, rate)."""
    any_dec = next(iter(decomps.values()))
    results: dict[str, EstimationResult] = {
        name: estimate_eps_z_locc(records, dec) for name, dec in decomps.items()
    }
    best = min(results, key=lambda name: results[name].eps_z)
    eps_z_hat = results[best].eps_z
    ex = min(max(eps_x_hat, 0.0), 1.0)
    rate_raw = 1.0 - binary_entropy(ex) - binary_entropy(eps_z_hat)
    rate = key_rate(ex, eps_z_hat)
    net = (1.0 - (m_x + m_z) / config.n) * rate
    group_means = {}
    group_counts = {}
    for (ja, jb), rec in sorted(records.items()):
        lab = _pair_label(any_dec, ja, jb)
        arr = np.asarray(rec, dtype=float)
        group_means[lab] = float(arr.mean())
        group_counts[lab] = int(arr.size)
    estimates = {
        "eps_x_hat": eps_x_hat,
        "m_x": m_x,
        "m_z": m_z,
        "candidates": {
            name: {
                "out": res.out,
                "eps_z_raw": res.eps_z_raw,
                "eps_z": res.eps_z,
                "clamped": res.clamped,
            }
            for name, res in results.items()
        },
        "best_candidate": best,
        "eps_z_hat": eps_z_hat,
        "rate": rate,
        "rate_raw": rate_raw,
        "net_rate": net,
        "group_means": group_means,
        "group_counts": group_counts,
    }
    return estimates, eps_z_hat, rate


def _finish_run(
    protocol: str,
    config: ProtocolConfig,
    events: list,
    estimates: dict,
    security: dict,
    alice_bits: np.ndarray,
    bob_bits: np.ndarray,
    eps_x_hat: float,
    eps_z_hat: float,
    rate: float,
    rng: np.random.Generator,
) -> Transcript:
    """Abort decision, toy EC, PA, and transcript assembly (shared by ppp/pm)."""
    if rate <= 0.0:
        events.append({"event": "abort", "reason": "rate_nonpositive"})
        return Transcript(
            schema=TRANSCRIPT_SCHEMA, protocol=protocol, config=config.to_dict(),
            events=events, estimates=estimates, security=security,
            key={"alice_hex": "", "bob_hex": "", "final_len": 0,
                 "raw_len": int(alice_bits.size), "agreement": None,
                 "final_key_empty": True, "ec": None},
            abort=True, abort_reason="rate_nonpositive",
        )
    corrected, ec_stats = error_correct(alice_bits, bob_bits, eps_x_hat, config.ec_block, rng)
    events.append({"event": "error_correct", **ec_stats})
    raw_len = int(alice_bits.size)
    final_len = pa_length(raw_len, eps_x_hat, eps_z_hat, ec_stats["syndrome_bits"], config.s)
    seed = toeplitz_seed(raw_len, final_len, rng)
    alice_fin = toeplitz_apply(alice_bits, seed, final_len)
    bob_fin = toeplitz_apply(corrected, seed, final_len)
    events.append({"event": "privacy_amplify", "raw_len": raw_len, "final_len": final_len})
    agreement = bool(np.array_equal(alice_fin, bob_fin)) if final_len > 0 else None
    key = {
        "raw_len": raw_len,
        "alice_hex": bits_to_hex(alice_fin),
        "bob_hex": bits_to_hex(bob_fin),
        "final_len": final_len,
        "agreement": agreement,
        "final_key_empty": final_len == 0,
        "ec": ec_stats,
    }
    events.append({"event": "complete"})
    return Transcript(
        schema=TRANSCRIPT_SCHEMA, protocol=protocol, config=config.to_dict(),
        events=events, estimates=estimates, security=security, key=key,
        abort=False, abort_reason=None,
    )


def run_ppp(config: ProtocolConfig) -> Transcript:
    """Entanglement-based run: source distributes n copies, both sides measure.

    Position assignment: a single random permutation splits the n copies into
    the bit-error sample (m_x), one group per support pair of the candidate
    decompositions (m_prime each), and the key block (everything else).
    """
    rng = np.random.default_rng(config.seed)
    decomps = _candidate_decompositions(config.candidates)
    support = _support_union(decomps)
    m_x, m_prime, err = _resolve_budgets(config, len(support))
    if err:
        return _abort_transcript(config, "ppp", err)
    m_z = m_prime * len(support)
    any_dec = next(iter(decomps.values()))

    events: list = [{"event": "configure", "n": config.n, "seed": config.seed}]
    components = _component_states(config)
    tables = _build_tables(components, support, any_dec)

    codes = _pattern_codes(config, rng)
    events.append({"event": "distribute", "source": config.source.kind, "copies": config.n})

    perm = rng.permutation(config.n)
    pos_x = perm[:m_x]
    group_pos = {
        pair: perm[m_x + i * m_prime : m_x + (i + 1) * m_prime]
        for i, pair in enumerate(support)
    }
    pos_key = perm[m_x + m_z :]
    events.append({
        "event": "assign_positions",
        "m_x": m_x,
        "m_prime": m_prime,
        "m_z": m_z,
        "groups": {_pair_label(any_dec, *pair): int(len(p)) for pair, p in sorted(group_pos.items())},
        "key_count": int(pos_key.size),
    })

    bit_signs = _sample_signs(tables.zz_plus, codes[pos_x], rng)
    eps_x_hat = float((1.0 - bit_signs.mean()) / 2.0)
    events.append({"event": "measure_bit_error", "count": m_x})

    records = {}
    for pair in support:
        signs = _sample_signs(tables.group_plus[pair], codes[group_pos[pair]], rng)
        records[pair] = 0.25 * signs
    events.append({
        "event": "measure_phase_groups",
        "counts": {_pair_label(any_dec, *pair): int(records[pair].size) for pair in support},
    })

    estimates, eps_z_hat, rate = _estimate_block(records, decomps, eps_x_hat, config, m_x, m_z)
    events.append({
        "event": "estimate",
        "eps_x_hat": eps_x_hat,
        "eps_z_hat": eps_z_hat,
        "best_candidate": estimates["best_candidate"],
    })
    security = _security_block(config, m_x, m_z)

    key16 = _sample_categorical(tables.joint16, codes[pos_key], rng)
    # side outcomes ka, kb in 0..3 = (key bit, shield bit); keep the key bits
    alice_bits = ((key16 // 4) >> 1).astype(np.uint8)
    bob_bits = ((key16 % 4) >> 1).astype(np.uint8)

    return _finish_run(
        "ppp", config, events, estimates, security,
        alice_bits, bob_bits, eps_x_hat, eps_z_hat, rate, rng,
    )


def run_pm(config: ProtocolConfig) -> Transcript:
    """Prepare-and-measure run with uncoordinated local basis choices.

    Alice assigns n_c = ceil(sqrt(n s) log2(n) / delta) positions to each of
    her support observables (preparing the corresponding signal ensembles),
    Bob does the same on his side independently, and only coincidentally
    matched positions feed the estimator.  Both keep the computational
    observable on all remaining positions; doubly-computational positions
    carry the key.  Receipt is confirmed before any bases are announced.
    """
    rng = np.random.default_rng(config.seed)
    decomps = _candidate_decompositions(config.candidates)
    support = _support_union(decomps)
    any_dec = next(iter(decomps.values()))
    ja_set = sorted({ja for ja, _ in support})
    jb_set = sorted({jb for _, jb in support})

    n, s = config.n, config.s
    n_c = math.ceil(math.sqrt(n * s) * math.log2(n) / config.delta)
    m_x = config.m_x if config.m_x is not None else max(64, n // 100)
    min_group = config.m_prime if config.m_prime is not None else 16
    if len(ja_set) * n_c >= n or len(jb_set) * n_c >= n:
        return _abort_transcript(
            config, "pm",
            f"parameters_infeasible: test load {max(len(ja_set), len(jb_set))} * n_c = "
            f"{max(len(ja_set), len(jb_set)) * n_c} does not fit in n = {n}",
        )

    events: list = [{"event": "configure", "n": n, "seed": config.seed, "n_c": n_c}]
    components = _component_states(config)
    tables = _build_tables(components, support, any_dec)

    codes = _pattern_codes(config, rng)
    events.append({"event": "prepare_and_send", "source": config.source.kind, "copies": n})
    events.append({"event": "measure", "note": "receiver measures on arrival"})
    events.append({"event": "receipt_confirmed", "copies": n})

    # uncoordinated basis assignment (-1 means computational)
    perm_a = rng.permutation(n)
    perm_b = rng.permutation(n)
    a_obs = np.full(n, -1, dtype=np.int64)
    b_obs = np.full(n, -1, dtype=np.int64)
    for i, ja in enumerate(ja_set):
        a_obs[perm_a[i * n_c : (i + 1) * n_c]] = ja
    for i, jb in enumerate(jb_set):
        b_obs[perm_b[i * n_c : (i + 1) * n_c]] = jb
    events.append({"event": "bases_announced",
                   "test_sets_a": len(ja_set), "test_sets_b": len(jb_set), "n_c": n_c})

    group_pos = {}
    for pair in support:
        ja, jb = pair
        group_pos[pair] = np.nonzero((a_obs == ja) & (b_obs == jb))[0]
    key_all = np.nonzero((a_obs == -1) & (b_obs == -1))[0]
    matched_counts = {_pair_label(any_dec, *pair): int(group_pos[pair].size) for pair in support}
    events.append({
        "event": "sift",
        "matched_counts": matched_counts,
        "key_candidates": int(key_all.size),
        "discarded": int(n - key_all.size - sum(v.size for v in group_pos.values())),
    })

    short = [
        _pair_label(any_dec, *pair)
        for pair in support
        if group_pos[pair].size < max(1, min_group)
    ]
    if short or key_all.size < m_x + config.ec_block:
        reason = (
            "insufficient_samples: "
            + (f"groups below floor {min_group}: {short}" if short
               else f"key candidates {key_all.size} cannot cover m_x = {m_x}")
        )
        events.append({"event": "abort", "reason": reason})
        return Transcript(
            schema=TRANSCRIPT_SCHEMA, protocol="pm", config=config.to_dict(),
            events=events, estimates={}, security={},
            key={"alice_hex": "", "bob_hex": "", "final_len": 0, "raw_len": 0,
                 "agreement": None, "final_key_empty": True, "ec": None},
            abort=True, abort_reason=reason,
        )

    test_idx = rng.choice(key_all.size, size=m_x, replace=False)
    test_mask = np.zeros(key_all.size, dtype=bool)
    test_mask[test_idx] = True
    pos_x = key_all[test_mask]
    pos_key = key_all[~test_mask]

    bit_signs = _sample_signs(tables.zz_plus, codes[pos_x], rng)
    eps_x_hat = float((1.0 - bit_signs.mean()) / 2.0)
    events.append({"event": "measure_bit_error", "count": int(m_x)})

    records = {}
    for pair in support:
        signs = _sample_signs(tables.group_plus[pair], codes[group_pos[pair]], rng)
        records[pair] = 0.25 * signs
    m_z = int(sum(v.size for v in group_pos.values()))
    events.append({"event": "measure_phase_groups", "counts": matched_counts})

    estimates, eps_z_hat, rate = _estimate_block(records, decomps, eps_x_hat, config, m_x, m_z)
    estimates["n_c"] = n_c
    events.append({
        "event": "estimate",
        "eps_x_hat": eps_x_hat,
        "eps_z_hat": eps_z_hat,
        "best_candidate": estimates["best_candidate"],
    })
    security = _security_block(config, m_x, m_z)

    key16 = _sample_categorical(tables.joint16, codes[pos_key], rng)
    alice_bits = ((key16 // 4) >> 1).astype(np.uint8)
    bob_bits = ((key16 % 4) >> 1).astype(np.uint8)

    return _finish_run(
        "pm", config, events, estimates, security,
        alice_bits, bob_bits, eps_x_hat, eps_z_hat, rate, rng,
    )


def pm_signal_ensemble(
    state: DensityState,
    label_a: str,
    side_a: Sequence[str] = ("A", "A'"),
    side_b: Sequence[str] = ("B", "B'"),
) -> list[tuple[float, DensityState]]:
    """Signal ensemble Alice prepares on Bob's side by measuring one observable.

    Measuring the product observable ``label_a`` (letters over IXYZ, one per
    side-A factor, identity factors read in the computational basis) on her
    share of ``state`` collapses Bob's share to a conditional state with the
    outcome's probability.  Returns the (probability, normalized state)
    list in eigenvector order; zero-probability outcomes keep a zero state.
    """
    from .estimation import _permute_sides  # shared index plumbing

    vals_a, vecs_a = local_eigensystem(label_a)
    rho = _permute_sides(state.mat, state.layout, side_a, side_b)
    da = vecs_a.shape[0]
    db = state.layout.dim // da
    rho4 = rho.reshape(da, db, da, db)
    out_layout = state.layout.restrict(side_b)
    out = []
    for k in range(da):
        v = vecs_a[:, k]
        cond = np.einsum("i,ipjq,j->pq", v.conj(), rho4, v)
        prob = float(np.trace(cond).real)
        if prob > 1e-15:
            cond = cond / prob
        else:
            prob = 0.0
            cond = np.zeros((db, db), dtype=complex)
        out.append((prob, DensityState(cond, out_layout)))
    return out
