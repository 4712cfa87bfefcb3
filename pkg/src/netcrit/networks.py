"""Compile a linear (or linear-residual) network into polynomial systems.

The weight variables are flattened layer-major, then row-major within each
layer: variable ``sum(d[i-1]*d[i] for earlier layers) + row*d[k-1] + col``
is entry (row, col) of layer k.  Every module and archive in the package
uses this order, so points keep their identity across the pipeline.

The squared norm in the loss is the plain polynomial sum of squared entries,
without complex conjugation; evaluating it at a complex point therefore
yields the pseudo-loss that the landscape analysis reports per component.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import NonSquareLayer, NotWidthOne, RankOutOfRange, ShapeMismatch
from .linalg import numerical_rank
from .poly import Polynomial, PolySystem
from .rng import derive_rng


@dataclass(frozen=True)
class Architecture:
    """Layer widths d_0..d_{H+1} plus the residual flag."""

    dims: tuple
    residual: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 3:
            raise ShapeMismatch("need at least two weight layers (three width entries)")
        if any(d < 1 for d in dims):
            raise ShapeMismatch(f"layer widths must be positive, got {dims}")
        if self.residual and len(set(dims)) != 1:
            raise NonSquareLayer(f"residual nets need equal layer widths, got {dims}")

    @property
    def nlayers(self) -> int:
        """Number of weight matrices (H+1)."""
        return len(self.dims) - 1

    @property
    def depth(self) -> int:
        """H, the number of hidden layers."""
        return self.nlayers - 1

    @property
    def width(self) -> int:
        return min(self.dims)

    @property
    def nvars(self) -> int:
        return sum(self.dims[i] * self.dims[i + 1] for i in range(self.nlayers))

    def layer_shape(self, k: int) -> tuple:
        """Shape (rows, cols) of weight layer k (0-based)."""
        return (self.dims[k + 1], self.dims[k])

    def layer_offsets(self) -> list[int]:
        """Start index of each layer's block in the flattened vector."""
        offsets = [0]
        for k in range(self.nlayers):
            r, c = self.layer_shape(k)
            offsets.append(offsets[-1] + r * c)
        return offsets

    def variable_groups(self) -> list[list[int]]:
        """Variable indices grouped by layer (for multi-homogeneous starts)."""
        offsets = self.layer_offsets()
        return [list(range(offsets[k], offsets[k + 1])) for k in range(self.nlayers)]

    def label(self) -> str:
        name = "-".join(str(d) for d in self.dims)
        return name + ("-res" if self.residual else "")


@dataclass(frozen=True)
class TrainingSet:
    """Real data matrix X (d_x x m) and target matrix Y (d_y x m)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2:
            raise ShapeMismatch("X and Y must be 2-d")
        if x.shape[1] != y.shape[1]:
            raise ShapeMismatch(f"sample counts differ: X has {x.shape[1]}, Y has {y.shape[1]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ShapeMismatch("data entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def nsamples(self) -> int:
        return self.x.shape[1]

    def check(self, arch: Architecture) -> None:
        if self.x.shape[0] != arch.dims[0]:
            raise ShapeMismatch(f"X has {self.x.shape[0]} rows, architecture wants {arch.dims[0]}")
        if self.y.shape[0] != arch.dims[-1]:
            raise ShapeMismatch(f"Y has {self.y.shape[0]} rows, architecture wants {arch.dims[-1]}")

    def target_scale(self) -> float:
        """Half the squared Frobenius norm of Y (the loss at the origin)."""
        return 0.5 * float(np.sum(self.y * self.y))


def unflatten(point, arch: Architecture) -> list[np.ndarray]:
    """Split a flattened weight vector into per-layer complex matrices."""
    w = np.asarray(point, dtype=np.complex128)
    if w.shape != (arch.nvars,):
        raise ShapeMismatch(f"point length {w.shape} != nvars {arch.nvars}")
    offsets = arch.layer_offsets()
    return [
        w[offsets[k] : offsets[k + 1]].reshape(arch.layer_shape(k))
        for k in range(arch.nlayers)
    ]


def flatten(layers, arch: Architecture) -> np.ndarray:
    """Inverse of :func:`unflatten`."""
    parts = []
    for k, mat in enumerate(layers):
        m = np.asarray(mat, dtype=np.complex128)
        if m.shape != arch.layer_shape(k):
            raise ShapeMismatch(f"layer {k} has shape {m.shape}, expected {arch.layer_shape(k)}")
        parts.append(m.reshape(-1))
    return np.concatenate(parts)


def symbolic_layers(arch: Architecture) -> list[list[list[Polynomial]]]:
    """Per-layer matrices of variable polynomials (I + W per layer if residual)."""
    n = arch.nvars
    offsets = arch.layer_offsets()
    out = []
    for k in range(arch.nlayers):
        rows, cols = arch.layer_shape(k)
        mat = []
        for r in range(rows):
            row = []
            for c in range(cols):
                entry = Polynomial.variable(offsets[k] + r * cols + c, n)
                if arch.residual and r == c:
                    entry = entry + 1.0
                row.append(entry)
            mat.append(row)
        out.append(mat)
    return out


def _matmul(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    out = []
    for r in range(rows):
        row = []
        for c in range(cols):
            acc = a[r][0] * b[0][c]
            for i in range(1, inner):
                acc = acc + a[r][i] * b[i][c]
            row.append(acc)
        out.append(row)
    return out


def symbolic_product(arch: Architecture) -> list[list[Polynomial]]:
    """Entries of the full chained product as polynomials (output x input)."""
    layers = symbolic_layers(arch)
    prod = layers[0]
    for mat in layers[1:]:
        prod = _matmul(mat, prod)
    return prod


def build_loss(arch: Architecture, data: TrainingSet) -> Polynomial:
    """Expanded squared-error loss polynomial, total degree 2*(H+1)."""
    data.check(arch)
    prod = symbolic_product(arch)
    n = arch.nvars
    loss = Polynomial.zero(n)
    for i in range(data.nsamples):
        xi = data.x[:, i]
        yi = data.y[:, i]
        for out_row in range(arch.dims[-1]):
            entry = Polynomial.constant(-yi[out_row], n)
            for c in range(arch.dims[0]):
                if xi[c] != 0.0:
                    entry = entry + prod[out_row][c] * xi[c]
            loss = loss + entry * entry
    return loss * 0.5


def build_gradient_system(loss: Polynomial) -> PolySystem:
    """One partial derivative per weight variable."""
    return PolySystem([loss.differentiate(j) for j in range(loss.nvars)])


def _poly_det(mat) -> Polynomial:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    total = None
    for c in range(n):
        minor = [[mat[r][cc] for cc in range(n) if cc != c] for r in range(1, n)]
        term = mat[0][c] * _poly_det(minor)
        if c % 2:
            term = -term
        total = term if total is None else total + term
    return total


def build_product_minors(arch: Architecture, r: int) -> PolySystem:
    """All r x r minors of the symbolic product matrix, fully expanded.

    Appending these to the gradient system carves out the critical points
    whose product matrix has rank below r.
    """
    if not 1 <= r <= arch.width:
        raise RankOutOfRange(f"rank bound {r} outside 1..{arch.width}")
    prod = symbolic_product(arch)
    rows, cols = len(prod), len(prod[0])
    from itertools import combinations

    minors = []
    for rsel in combinations(range(rows), r):
        for csel in combinations(range(cols), r):
            sub = [[prod[i][j] for j in csel] for i in rsel]
            minors.append(_poly_det(sub))
    return PolySystem(minors)


def residual_shift(
    point, arch: Architecture, direction: Literal["to_plain", "to_residual"]
) -> np.ndarray:
    """Translate between residual coordinates W' and plain coordinates I + W'.

    ``to_plain`` adds the identity block per layer, ``to_residual`` subtracts
    it; applying one and then the other returns the input.
    """
    if len(set(arch.dims)) != 1:
        raise NonSquareLayer(f"shift needs equal layer widths, got {arch.dims}")
    if direction not in ("to_plain", "to_residual"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = 1.0 if direction == "to_plain" else -1.0
    layers = unflatten(point, arch)
    d = arch.dims[0]
    eye = np.eye(d, dtype=np.complex128)
    return flatten([mat + sign * eye for mat in layers], arch)


@dataclass(frozen=True)
class ExpectedComponent:
    """One row of an analytically known decomposition."""

    dim: int
    degree: int
    count: int
    contains_origin: bool
    kind: str  # "global_minimum" | "saddle_component"


def width1_oracle(arch: Architecture, data: TrainingSet) -> list[ExpectedComponent]:
    """Closed-form decomposition for all-width-1 chains.

    The critical set splits into the degree-(H+1) hypersurface where the
    chained product equals the least-squares scalar, plus one coordinate
    plane per unordered pair of weights where both vanish.  Valid for
    generic data (nonzero x.y correlation).
    """
    if any(d != 1 for d in arch.dims):
        raise NotWidthOne(f"all layer widths must be 1, got {arch.dims}")
    if arch.residual:
        raise NotWidthOne("closed form covers plain chains; shift residual nets first")
    data.check(arch)
    b = float(data.x[0] @ data.y[0])
    if b == 0.0:
        raise ShapeMismatch("degenerate data: x.y correlation is zero")
    n = arch.nvars  # == number of weight layers H+1
    pairs = n * (n - 1) // 2
    return [
        ExpectedComponent(dim=n - 1, degree=n, count=1, contains_origin=False,
                          kind="global_minimum"),
        ExpectedComponent(dim=n - 2, degree=1, count=pairs, contains_origin=True,
                          kind="saddle_component"),
    ]


def generate_realizable_data(
    arch: Architecture, m: int, seed: int, return_teacher: bool = False
):
    """Gaussian inputs plus targets produced by a random teacher network.

    The teacher product is redrawn until it has full rank (width of the net),
    so the global minimum value is exactly zero and the rank-k stratum is
    nonempty.  Deterministic as a function of (arch, m, seed).  With
    ``return_teacher`` the flattened teacher weights come back as well.
    """
    if m < 1:
        raise ShapeMismatch(f"need at least one sample, got {m}")
    # keyed on dims only: a residual net and its plain twin share data
    dims_tag = "-".join(str(d) for d in arch.dims)
    for attempt in range(64):
        rng = derive_rng(seed, "data", dims_tag, m, attempt)
        x = rng.standard_normal((arch.dims[0], m))
        teacher = [rng.standard_normal(arch.layer_shape(k)) for k in range(arch.nlayers)]
        prod = teacher[0]
        for mat in teacher[1:]:
            prod = mat @ prod
        if numerical_rank(prod.astype(np.complex128), 1e-8) == arch.width:
            data = TrainingSet(x=x, y=prod @ x)
            if return_teacher:
                return data, flatten(teacher, arch)
            return data
    raise ShapeMismatch("could not draw a full-rank teacher (degenerate architecture?)")
