"""Real-valued cone programs with linear, SOC, rotated SOC and exponential cone blocks.

Programs are assembled from :class:`Affine` expressions over named variable
blocks and solved with the Clarabel interior-point solver. Complex decision
vectors are stored as interleaved ``(real, imag)`` pairs.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-8
_PRUNE = 1e-13


class Affine:
    """Sparse affine expression ``sum_j coef_j * z_j + const``."""

    __slots__ = ("coef", "const")

    def __init__(self, coef: dict[int, float] | None = None, const: float = 0.0):
        self.coef = dict(coef) if coef else {}
        self.const = float(const)

    @classmethod
    def var(cls, index: int) -> "Affine":
        return cls({int(index): 1.0})

    @classmethod
    def linear(cls, indices, coefs, const: float = 0.0) -> "Affine":
        out = cls(const=const)
        for i, c in zip(np.asarray(indices).ravel(), np.asarray(coefs, dtype=float).ravel()):
            if c != 0.0:
                out.coef[int(i)] = out.coef.get(int(i), 0.0) + float(c)
        return out

    @classmethod
    def total(cls, terms) -> "Affine":
        out = cls()
        for t in terms:
            out = out + t
        return out

    def __add__(self, other):
        if not isinstance(other, Affine):
            return Affine(self.coef, self.const + float(other))
        coef = dict(self.coef)
        for i, c in other.coef.items():
            coef[i] = coef.get(i, 0.0) + c
        return Affine(coef, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine({i: -c for i, c in self.coef.items()}, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Affine) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        scalar = float(scalar)
        return Affine({i: scalar * c for i, c in self.coef.items()}, scalar * self.const)

    __rmul__ = __mul__

    def value(self, z: np.ndarray) -> float:
        return self.const + sum(c * z[i] for i, c in self.coef.items())

    def row(self, n: int) -> np.ndarray:
        r = np.zeros(n)
        for i, c in self.coef.items():
            r[i] += c
        return r

    def __repr__(self):
        terms = " + ".join(f"{c:g}*z{i}" for i, c in sorted(self.coef.items()))
        return f"Affine({terms or '0'} + {self.const:g})"


@dataclass
class LinearRow:
    expr: Affine
    relation: str  # "<=" means expr <= 0, "==" means expr == 0
    name: str = ""


@dataclass
class ConeBlock:
    kind: str  # "soc", "rsoc" or "exp"
    exprs: list[Affine]
    name: str = ""


@dataclass
class ConicProgram:
    """``maximize objective(z)`` subject to linear rows and cone memberships.

    Cone semantics:

    * ``soc``: ``||(e_1, ..., e_m)|| <= e_0``;
    * ``rsoc``: ``2 e_0 e_1 >= ||(e_2, ...)||^2`` with ``e_0, e_1 >= 0``;
    * ``exp``: ``e_1 * exp(e_0 / e_1) <= e_2`` with ``e_1 > 0``.
    """

    n_vars: int = 0
    objective: Affine = field(default_factory=Affine)
    rows: list[LinearRow] = field(default_factory=list)
    cones: list[ConeBlock] = field(default_factory=list)
    blocks: dict[str, np.ndarray] = field(default_factory=dict)

    def add_vars(self, name: str, size: int) -> np.ndarray:
        if name in self.blocks:
            raise ValueError(f"variable block {name!r} already exists")
        idx = np.arange(self.n_vars, self.n_vars + size)
        self.blocks[name] = idx
        self.n_vars += size
        return idx

    def add_var(self, name: str) -> Affine:
        return Affine.var(self.add_vars(name, 1)[0])

    def add_le(self, lhs, rhs=0.0, name: str = ""):
        self.rows.append(LinearRow(_as_affine(lhs) - rhs, "<=", name))

    def add_eq(self, lhs, rhs=0.0, name: str = ""):
        self.rows.append(LinearRow(_as_affine(lhs) - rhs, "==", name))

    def add_soc(self, head, tail, name: str = ""):
        self.cones.append(ConeBlock("soc", [_as_affine(head), *map(_as_affine, tail)], name))

    def add_rsoc(self, a, b, rest, name: str = ""):
        self.cones.append(ConeBlock("rsoc", [_as_affine(a), _as_affine(b), *map(_as_affine, rest)], name))

    def add_exp(self, u, v, w, name: str = ""):
        self.cones.append(ConeBlock("exp", [_as_affine(u), _as_affine(v), _as_affine(w)], name))

    def count(self, kind: str) -> int:
        return sum(1 for c in self.cones if c.kind == kind)

    def var_names(self) -> list[str]:
        names = [""] * self.n_vars
        for block, idx in self.blocks.items():
            for j, i in enumerate(idx):
                names[i] = block if len(idx) == 1 else f"{block}[{j}]"
        return names

    def validate(self):
        used = set(self.objective.coef)
        for item in [r.expr for r in self.rows] + [e for c in self.cones for e in c.exprs]:
            bad = [i for i in item.coef if not 0 <= i < self.n_vars]
            if bad:
                raise ValueError(f"variable index out of range: {bad}")
            used.update(item.coef)
        unused = sorted(set(range(self.n_vars)) - used)
        if unused:
            names = self.var_names()
            raise ValueError(f"variables not referenced anywhere: {[names[i] for i in unused]}")

    def violation(self, z: np.ndarray, relative: bool = False) -> float:
        """Largest constraint violation of ``z`` (0 when feasible).

        With ``relative=True`` each block's violation is divided by
        ``1 + max|e_i|`` over that block's expressions.
        """
        worst = 0.0
        for r in self.rows:
            v = r.expr.value(z)
            v = abs(v) if r.relation == "==" else max(v, 0.0)
            if relative:
                v /= 1.0 + max(abs(r.expr.const), abs(r.expr.value(z) - r.expr.const))
            worst = max(worst, v)
        for c in self.cones:
            e = np.array([x.value(z) for x in c.exprs])
            if c.kind == "soc":
                v = np.linalg.norm(e[1:]) - e[0]
            elif c.kind == "rsoc":
                a, b, rest = e[0], e[1], e[2:]
                soc_gap = np.hypot(np.linalg.norm(rest), (a - b) / np.sqrt(2)) - (a + b) / np.sqrt(2)
                v = max(soc_gap, -a, -b)
            else:
                u, vv, w = e
                v = vv * np.exp(min(u / vv, 700.0)) - w if vv > 0 else max(-vv, u, -w)
            if relative:
                v /= 1.0 + np.max(np.abs(e))
            worst = max(worst, v)
        return float(worst)

    def dump(self) -> str:
        """Human-readable listing of the program."""
        names = self.var_names()

        def fmt(e: Affine) -> str:
            terms = [f"{c:+.6g}*{names[i]}" for i, c in sorted(e.coef.items())]
            if e.const or not terms:
                terms.append(f"{e.const:+.6g}")
            return " ".join(terms)

        out = io.StringIO()
        out.write(f"variables: {self.n_vars}\n")
        for block, idx in self.blocks.items():
            out.write(f"  {block}: {idx[0]}..{idx[-1]}\n")
        out.write(f"maximize {fmt(self.objective)}\n")
        for r in self.rows:
            out.write(f"row {r.name or '-'}: {fmt(r.expr)} {r.relation} 0\n")
        for c in self.cones:
            out.write(f"{c.kind} {c.name or '-'}:\n")
            for e in c.exprs:
                out.write(f"    {fmt(e)}\n")
        return out.getvalue()


def _as_affine(x) -> Affine:
    return x if isinstance(x, Affine) else Affine(const=float(x))


@dataclass
class ConicSolution:
    z: np.ndarray
    objective: float
    status: str  # "optimal", "infeasible", "unbounded" or "numerical_trouble"
    primal_residual: float
    gap: float
    iterations: int
    blocks: dict[str, np.ndarray]

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def value(self, name: str) -> np.ndarray:
        return self.z[self.blocks[name]]

    def scalar(self, name: str) -> float:
        return float(self.value(name)[0])


_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def _all_exprs(p: ConicProgram):
    yield from (r.expr for r in p.rows)
    for c in p.cones:
        yield from c.exprs


def solve(p: ConicProgram, tol: float = DEFAULT_TOL, max_iter: int = 200) -> ConicSolution:
    """Solve ``p`` to optimality.

    ``status == "optimal"`` is only returned when the returned point violates
    no constraint block by more than ``tol`` relative to the block's magnitude.
    """
    n = p.n_vars
    # coefficients of a vanished stream can reach 1e-50 and wreck the KKT
    # factorization; anything this far below the problem scale is zero
    scale = max([1.0] + [abs(v) for e in _all_exprs(p) for v in e.coef.values()])
    cutoff = _PRUNE * scale

    def vec(expr: Affine):
        r = expr.row(n)
        r[np.abs(r) < cutoff] = 0.0
        return r, expr.const

    def is_zero(expr: Affine) -> bool:
        r, c = vec(expr)
        return not r.any() and abs(c) < cutoff

    zero, nonneg, cone_rows, cones = [], [], [], []
    for r in p.rows:
        (zero if r.relation == "==" else nonneg).append(r.expr if r.relation == "==" else -r.expr)
    for c in p.cones:
        if c.kind == "exp":
            cone_rows += list(c.exprs)
            cones.append(clarabel.ExponentialConeT())
            continue
        head = list(c.exprs[:2 if c.kind == "rsoc" else 1])
        rest = [e for e in c.exprs[len(head):] if not is_zero(e)]
        if not rest:
            # an empty tail leaves plain sign constraints on the head entries
            nonneg += head
        elif c.kind == "soc":
            cone_rows += head + rest
            cones.append(clarabel.SecondOrderConeT(1 + len(rest)))
        elif c.kind == "rsoc":
            s2 = np.sqrt(0.5)
            cone_rows += [(head[0] + head[1]) * s2, (head[0] - head[1]) * s2] + rest
            cones.append(clarabel.SecondOrderConeT(2 + len(rest)))
        else:
            raise ValueError(f"unknown cone kind {c.kind!r}")
    prefix = []
    if zero:
        prefix.append(clarabel.ZeroConeT(len(zero)))
    if nonneg:
        prefix.append(clarabel.NonnegativeConeT(len(nonneg)))
    cones = prefix + cones

    # Clarabel form: s = b - A z lies in the cone, with s = expr(z)
    rows = [vec(e) for e in zero + nonneg + cone_rows]
    A = sp.csc_matrix(-np.array([r for r, _ in rows]).reshape(len(rows), n))
    b_vals = [c for _, c in rows]
    b = np.array(b_vals, dtype=float)
    q = -p.objective.row(n)
    # Clarabel measures its tolerances on an equilibrated problem, so first ask
    # for a tighter solve; degenerate programs (a stream whose power has
    # vanished) get through without equilibration or with shorter steps
    best = None
    for inner_tol, extra in _ATTEMPTS:
        sol = _solve_once(p, q, A, b, cones, inner_tol * tol, tol, max_iter, extra)
        if sol.ok:
            return sol
        if best is None or sol.primal_residual < best.primal_residual:
            best = sol
    return best


_ATTEMPTS = (
    (0.1, {}),
    (1.0, {}),
    (0.1, {"equilibrate_enable": False}),
    (1.0, {"equilibrate_enable": False}),
    (1.0, {"max_step_fraction": 0.9}),
)


def _solve_once(p, q, A, b, cones, inner_tol, tol, max_iter, extra) -> ConicSolution:
    n = p.n_vars
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = inner_tol
    settings.tol_gap_rel = inner_tol
    settings.tol_feas = inner_tol
    settings.tol_ktratio = min(settings.tol_ktratio, inner_tol)
    for key, value in extra.items():
        setattr(settings, key, value)
    raw = clarabel.DefaultSolver(sp.csc_matrix((n, n)), q, A, b, cones, settings).solve()

    z = np.array(raw.x, dtype=float)
    status = _STATUS.get(str(raw.status), "numerical_trouble")
    residual = p.violation(z, relative=True) if z.size == n and np.all(np.isfinite(z)) else float("inf")
    gap = abs(raw.obj_val - raw.obj_val_dual) / (1.0 + abs(raw.obj_val))
    # AlmostSolved only meets Clarabel's reduced tolerances; hold it to ours
    if status == "optimal" and not (residual <= tol and gap <= tol):
        status = "numerical_trouble"
    obj = p.objective.value(z) if np.isfinite(residual) else float("nan")
    return ConicSolution(z=z, objective=float(obj), status=status, primal_residual=float(residual),
                         gap=float(gap), iterations=int(raw.iterations), blocks=dict(p.blocks))


def embed_complex(v: np.ndarray) -> np.ndarray:
    """Interleave real and imaginary parts: ``[Re v0, Im v0, Re v1, Im v1, ...]``."""
    v = np.asarray(v, dtype=complex).ravel(order="F")
    out = np.empty(2 * v.size)
    out[0::2] = v.real
    out[1::2] = v.imag
    return out


def extract_complex(z: np.ndarray, shape=None) -> np.ndarray:
    """Inverse of :func:`embed_complex`; matrices are restored column-major."""
    z = np.asarray(z, dtype=float)
    v = z[0::2] + 1j * z[1::2]
    return v if shape is None else v.reshape(shape, order="F")


def real_part(c: np.ndarray, idx: np.ndarray, const: float = 0.0) -> Affine:
    """``Re{c^H f}`` where ``f`` is embedded at indices ``idx``."""
    c = np.asarray(c, dtype=complex)
    coefs = np.empty(2 * c.size)
    coefs[0::2] = c.real
    coefs[1::2] = c.imag
    return Affine.linear(idx, coefs, const)


def imag_part(c: np.ndarray, idx: np.ndarray) -> Affine:
    """``Im{c^H f}`` where ``f`` is embedded at indices ``idx``."""
    c = np.asarray(c, dtype=complex)
    coefs = np.empty(2 * c.size)
    coefs[0::2] = -c.imag
    coefs[1::2] = c.real
    return Affine.linear(idx, coefs)
