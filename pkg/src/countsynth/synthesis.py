"""Generate synthetic tables by re-drawing every cell from its own count.

Each original cell count f becomes the mean of a noise distribution
(Poisson, NBI, or discretized GAF) and the synthetic cell is one draw from
it.  Empty cells are handled by a configurable policy: keep them empty,
give them a small pseudo-mean, or promote them to 1 with a fixed
probability.  Draws are keyed by (master_seed, replicate, cell), so results
are identical regardless of chunk size or worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import (
    FAMILIES,
    INT64_MAX,
    gaf_draw_values,
    nbi_draw_values,
    poisson_draw_values,
)
from .errors import ValidationError
from .samplers import bernoulli_rvs
from .streams import CellStreams, derive_key
from .table import ContingencyTable, TableSchema, ingest_aggregated, _label_frame

logger = logging.getLogger(__name__)

_CHUNK = 1 << 18
_SIDECAR = "ensemble.json"


@dataclass(frozen=True)
class ZeroPolicy:
    """What to do with empty cells: 'keep', 'pseudocount', or 'bernoulli'."""

    kind: str
    alpha: float | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "keep":
            if self.alpha is not None or self.p is not None:
                raise ValidationError("keep policy takes no parameters")
        elif self.kind == "pseudocount":
            if self.alpha is None or not np.isfinite(self.alpha) or self.alpha <= 0:
                raise ValidationError("pseudocount policy needs alpha > 0")
            if self.p is not None:
                raise ValidationError("pseudocount policy takes no p")
        elif self.kind == "bernoulli":
            if self.p is None or not np.isfinite(self.p) or not 0 <= self.p <= 1:
                raise ValidationError("bernoulli policy needs p in [0, 1]")
            if self.alpha is not None:
                raise ValidationError("bernoulli policy takes no alpha")
        else:
            raise ValidationError(f"unknown zero policy {self.kind!r}")

    @classmethod
    def keep(cls) -> "ZeroPolicy":
        return cls("keep")

    @classmethod
    def pseudocount(cls, alpha: float = 0.01) -> "ZeroPolicy":
        return cls("pseudocount", alpha=float(alpha))

    @classmethod
    def bernoulli(cls, p: float) -> "ZeroPolicy":
        return cls("bernoulli", p=float(p))

    @classmethod
    def parse(cls, text: str) -> "ZeroPolicy":
        """Parse CLI syntax: 'keep', 'alpha=X', or 'bernoulli=P'."""
        text = text.strip()
        if text == "keep":
            return cls.keep()
        if text.startswith("alpha="):
            try:
                return cls.pseudocount(float(text[len("alpha="):]))
            except ValueError:
                raise ValidationError(f"bad alpha in {text!r}") from None
        if text.startswith("bernoulli="):
            try:
                return cls.bernoulli(float(text[len("bernoulli="):]))
            except ValueError:
                raise ValidationError(f"bad probability in {text!r}") from None
        raise ValidationError(
            f"unknown zero policy {text!r}; use keep, alpha=X, or bernoulli=P"
        )

    @property
    def label(self) -> str:
        if self.kind == "keep":
            return "keep"
        if self.kind == "pseudocount":
            return f"alpha={self.alpha:g}"
        return f"bernoulli={self.p:g}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "p": self.p}

    @classmethod
    def from_dict(cls, doc: dict) -> "ZeroPolicy":
        return cls(doc["kind"], alpha=doc.get("alpha"), p=doc.get("p"))


@dataclass(frozen=True)
class MechanismConfig:
    """Complete description of one synthesis run (minus the table)."""

    family: str
    sigma: float | None = None
    nu: float | None = None
    zero_policy: ZeroPolicy = ZeroPolicy("keep")
    m: int = 1
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}; expected one of {FAMILIES}"
            )
        if self.family == "gaf":
            if self.sigma is None or self.nu is None:
                raise ValidationError("gaf needs both sigma and nu")
        elif self.family == "nbi":
            if self.sigma is None:
                raise ValidationError("nbi needs sigma")
            if self.nu is not None:
                raise ValidationError("nu only applies to the gaf family")
        else:  # poisson
            if self.sigma is not None or self.nu is not None:
                raise ValidationError("poisson takes neither sigma nor nu")
        if self.sigma is not None:
            if not np.isfinite(self.sigma) or self.sigma <= 0:
                raise ValidationError(f"sigma must be positive, got {self.sigma}")
            object.__setattr__(self, "sigma", float(self.sigma))
        if self.nu is not None:
            if not np.isfinite(self.nu):
                raise ValidationError(f"nu must be finite, got {self.nu}")
            object.__setattr__(self, "nu", float(self.nu))
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValidationError(f"m must be a positive integer, got {self.m!r}")
        if self.m >= 1 << 32:
            raise ValidationError("m must be below 2^32")
        if not isinstance(self.master_seed, (int, np.integer)):
            raise ValidationError("master_seed must be an integer")
        if not 0 <= self.master_seed < 1 << 64:
            raise ValidationError("master_seed must be in [0, 2^64)")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "sigma": self.sigma,
            "nu": self.nu,
            "zero_policy": self.zero_policy.to_dict(),
            "m": self.m,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MechanismConfig":
        return cls(
            family=doc["family"],
            sigma=doc.get("sigma"),
            nu=doc.get("nu"),
            zero_policy=ZeroPolicy.from_dict(doc["zero_policy"]),
            m=doc["m"],
            master_seed=doc["master_seed"],
        )


def table_hash(table: ContingencyTable) -> str:
    """SHA-256 over the schema and the dense counts (order-stable)."""
    h = hashlib.sha256()
    h.update(table.schema.to_json().encode())
    h.update(np.ascontiguousarray(table.counts).tobytes())
    return h.hexdigest()


@dataclass
class SyntheticEnsemble:
    """m synthetic tables over one schema, plus provenance and warnings."""

    schema: TableSchema
    config: MechanismConfig
    source_hash: str
    replicates: np.ndarray  # (m, n_cells) int64
    clamped: int = 0

    def __post_init__(self) -> None:
        reps = np.asarray(self.replicates, dtype=np.int64)
        if reps.ndim != 2 or reps.shape[0] != self.config.m \
                or reps.shape[1] != self.schema.n_cells:
            raise ValidationError("replicate array shape does not match config")
        self.replicates = reps

    @property
    def m(self) -> int:
        return self.replicates.shape[0]

    @property
    def n_cells(self) -> int:
        return self.replicates.shape[1]

    @property
    def stream_key(self) -> tuple[int, int]:
        """Derived per-run generator key (diagnostic; draws also mix replicate and cell)."""
        k0, k1 = derive_key(self.config.master_seed)
        return int(k0), int(k1)

    def replicate_table(self, r: int) -> ContingencyTable:
        return ContingencyTable(self.schema, self.replicates[r])

    def mean_counts(self) -> np.ndarray:
        return self.replicates.mean(axis=0)


def _finalize(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Round float draws into int64, clamping the unrepresentable top end."""
    if np.isnan(values).any():
        raise RuntimeError("sampler produced NaN draws")
    over = values >= 2.0**63
    n_over = int(np.count_nonzero(over))
    if n_over:
        # float64 cannot hold int64's max exactly, so cast the safe part
        # first and patch the clamped entries as integers.
        ints = np.where(over, 0.0, values).astype(np.int64)
        ints[over] = INT64_MAX
        return ints, n_over
    return values.astype(np.int64), n_over


def _draw(config: MechanismConfig, mu, streams: CellStreams) -> np.ndarray:
    if config.family == "gaf":
        return gaf_draw_values(mu, config.sigma, config.nu, streams)
    if config.family == "nbi":
        return nbi_draw_values(mu, config.sigma, streams)
    return poisson_draw_values(mu, streams)


def synthesize(table: ContingencyTable, config: MechanismConfig,
               threads: int = 1) -> SyntheticEnsemble:
    """Draw the full ensemble; identical output for any thread count."""
    if threads < 1:
        raise ValidationError("threads must be at least 1")
    counts = table.counts
    n_cells = counts.size
    out = np.zeros((config.m, n_cells), dtype=np.int64)

    nonzero = np.flatnonzero(counts)
    policy = config.zero_policy
    zeros = np.flatnonzero(counts == 0) if policy.kind != "keep" else None

    tasks = []
    for r in range(config.m):
        for start in range(0, nonzero.size, _CHUNK):
            tasks.append((r, nonzero[start:start + _CHUNK], "nonzero"))
        if zeros is not None:
            for start in range(0, zeros.size, _CHUNK):
                tasks.append((r, zeros[start:start + _CHUNK], "zero"))

    def run(task) -> int:
        r, ids, mode = task
        streams = CellStreams(config.master_seed, r, ids)
        if mode == "nonzero":
            vals = _draw(config, counts[ids].astype(np.float64), streams)
        elif policy.kind == "pseudocount":
            vals = _draw(config, np.full(ids.size, policy.alpha), streams)
        else:  # bernoulli
            vals = bernoulli_rvs(policy.p, streams).astype(np.float64)
        ints, n_over = _finalize(vals)
        out[r, ids] = ints
        return n_over

    if threads == 1:
        clamped = sum(run(t) for t in tasks)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            clamped = sum(pool.map(run, tasks))

    if clamped:
        logger.warning(
            "%d draw(s) exceeded the int64 range and were clamped", clamped
        )
    return SyntheticEnsemble(
        schema=table.schema,
        config=config,
        source_hash=table_hash(table),
        replicates=out,
        clamped=int(clamped),
    )


# ---------------------------------------------------------------------------
# Ensemble disk layout: one aggregated CSV per replicate plus a JSON sidecar;
# optionally a single long-format CSV for plotting tools.


def write_ensemble(ensemble: SyntheticEnsemble, outdir,
                   long_format: bool = False) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(ensemble.m - 1)))
    files = []
    for r in range(ensemble.m):
        name = f"replicate_{r:0{width}d}.csv"
        rep = ensemble.replicate_table(r)
        flat = rep.nonzero_cells()
        df = _label_frame(ensemble.schema, flat)
        df["count"] = rep.counts[flat]
        df.to_csv(outdir / name, index=False)
        files.append(name)

    if long_format:
        import pandas as pd

        pieces = []
        for r in range(ensemble.m):
            rep = ensemble.replicates[r]
            flat = np.flatnonzero(rep)
            df = _label_frame(ensemble.schema, flat)
            df.insert(0, "replicate", r)
            df["count"] = rep[flat]
            pieces.append(df)
        long_df = pd.concat(pieces, ignore_index=True) if pieces else None
        if long_df is not None:
            long_df.to_csv(outdir / "ensemble_long.csv", index=False)

    k0, k1 = ensemble.stream_key
    sidecar = {
        "format": "aggregated-per-replicate",
        "files": files,
        "config": ensemble.config.to_dict(),
        "source_hash": ensemble.source_hash,
        "clamped": ensemble.clamped,
        "stream": {"kind": "philox4x32-10", "key": [k0, k1]},
        "schema": json.loads(ensemble.schema.to_json()),
    }
    (outdir / _SIDECAR).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return outdir


def read_ensemble(dirpath) -> SyntheticEnsemble:
    dirpath = Path(dirpath)
    sidecar_path = dirpath / _SIDECAR
    if not sidecar_path.exists():
        raise ValidationError(f"no {_SIDECAR} in {dirpath}")
    try:
        doc = json.loads(sidecar_path.read_text())
        schema = TableSchema(tuple(
            (v["name"], tuple(v["categories"]))
            for v in doc["schema"]["variables"]
        ))
        config = MechanismConfig.from_dict(doc["config"])
        files = doc["files"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed ensemble sidecar: {exc}") from exc
    if len(files) != config.m:
        raise ValidationError("sidecar file list does not match m")
    reps = np.zeros((config.m, schema.n_cells), dtype=np.int64)
    for r, name in enumerate(files):
        rep = ingest_aggregated(dirpath / name, schema)
        reps[r] = rep.counts
    return SyntheticEnsemble(
        schema=schema,
        config=config,
        source_hash=doc.get("source_hash", ""),
        replicates=reps,
        clamped=int(doc.get("clamped", 0)),
    )
