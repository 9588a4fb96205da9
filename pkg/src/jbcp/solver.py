"""First-order conic solver with an active-face polishing step.

The solve routine runs Douglas-Rachford splitting on the homogeneous
self-dual embedding of ``min c.x  s.t.  A x + s = b, s in K`` where K mixes
nonnegative rays with (complex) PSD blocks.  Each iteration costs one
back-substitution against a cached Cholesky factor of I + A'A plus one
projection onto K, so re-solves after objective reweighting reuse all
factorization work, and warm starts carry over between related solves.

First-order iterations alone reach tight tolerances slowly, so once an
iterate is good to about 1e-5 the solver classifies the active cone faces,
solves the KKT equations restricted to those faces in least squares, and
accepts the refined point only if its verified residuals meet the requested
tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .frontend import ConeProgram
from .linalg import hermitian_unvec, hermitian_vec

__all__ = [
    "SolverSettings",
    "SolveResult",
    "KKTResiduals",
    "Workspace",
    "solve",
    "kkt_residuals",
]

OPTIMAL = "optimal-to-tolerance"
MAX_ITERATIONS = "max-iterations"
INFEASIBLE = "infeasible-certificate"
UNBOUNDED = "unbounded-certificate"

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SolverSettings:
    """Knobs for one conic solve.

    tolerance               max of primal/dual residual and gap at exit
    max_iterations          iteration cap before giving up
    warm_start              optional (x, y, s) triple from a related solve
    relaxation              over-relaxation parameter in (0, 2)
    check_interval          iterations between convergence checks
    polish                  enable active-face refinement
    polish_threshold        iterate quality that triggers a polish attempt
    certificate_tolerance   residual bound for infeasibility certificates
    auto_scale              rebalance the internal dual scale early in the run
    sigma                   pin the initial dual scale (None = keep/estimate);
                            an explicit pin also overrides the warm-start
                            scale heuristic
    time_limit              optional wall-clock cap in seconds
    """

    tolerance: float = 1e-8
    max_iterations: int = 100_000
    warm_start: tuple | None = None
    relaxation: float = 1.5
    check_interval: int = 25
    polish: bool = True
    polish_threshold: float = 3e-2
    certificate_tolerance: float = 1e-7
    auto_scale: bool = True
    sigma: float | None = None
    time_limit: float | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class SolveResult:
    """Solver output: points, status and verified residuals.

    status is one of "optimal-to-tolerance", "max-iterations",
    "infeasible-certificate" or "unbounded-certificate".  For certificate
    statuses x/y hold the certificate ray instead of a solution.
    """

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: str
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    polished: bool = False

    @property
    def max_residual(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.gap)


@dataclass(frozen=True)
class KKTResiduals:
    primal: float
    dual: float
    gap: float

    @property
    def max(self) -> float:
        return max(self.primal, self.dual, self.gap)


# --- cone geometry -----------------------------------------------------------


def _hvec_batch(mats: np.ndarray) -> np.ndarray:
    """hermitian_vec applied along the first axis of a (B, n, n) stack."""
    n = mats.shape[-1]
    iu, ju = np.triu_indices(n, k=1)
    off = mats[:, iu, ju]
    diag = np.real(mats[:, np.arange(n), np.arange(n)])
    return np.concatenate([diag, _SQRT2 * off.real, _SQRT2 * off.imag], axis=1)


def _hunvec_batch(segs: np.ndarray, n: int) -> np.ndarray:
    """hermitian_unvec applied along the first axis of a (B, n*n) stack."""
    b = segs.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    p = iu.size
    mats = np.zeros((b, n, n), dtype=np.complex128)
    off = (segs[:, n : n + p] + 1j * segs[:, n + p :]) / _SQRT2
    mats[:, iu, ju] = off
    mats[:, ju, iu] = off.conj()
    mats[:, np.arange(n), np.arange(n)] = segs[:, :n]
    return mats


def _project_psd_segments(segs: np.ndarray, n: int) -> np.ndarray:
    """Project a (B, n*n) stack of Hermitian vectorizations onto the PSD cone.

    One batched complex eigh covers the whole stack; entries that are already
    PSD pass through untouched.
    """
    mats = _hunvec_batch(segs, n)
    w, u = np.linalg.eigh(mats)
    needs = w[:, 0] < 0.0
    if not np.any(needs):
        return segs
    out = segs.copy()
    wn = np.maximum(w[needs], 0.0)
    un = u[needs]
    proj = (un * wn[:, None, :]) @ un.conj().swapaxes(1, 2)
    iu, ju = np.triu_indices(n, k=1)
    diag = proj[:, np.arange(n), np.arange(n)].real
    off = (proj[:, iu, ju] + proj[:, ju, iu].conj()) / 2.0
    out[needs] = np.concatenate([diag, _SQRT2 * off.real, _SQRT2 * off.imag], axis=1)
    return out


class _ConeGeometry:
    """Precomputed index structure for projecting the slack/dual segment.

    All PSD blocks are packed into one zero-padded batch so a single complex
    eigh covers them; padding lives on the diagonal as a large positive
    constant, which keeps the padded corner an exact invariant subspace, so
    eigenpairs never mix with the data block.
    """

    _PAD = 1e3

    def __init__(self, blocks):
        self.total = sum(blk.size for blk in blocks)
        nonneg: list[int] = []
        psd: list[tuple[int, int]] = []  # (order, offset)
        for blk in blocks:
            if blk.kind == "nonneg":
                nonneg.extend(range(blk.offset, blk.offset + blk.size))
            elif blk.kind == "psd":
                if blk.order == 1:
                    nonneg.append(blk.offset)
                else:
                    psd.append((blk.order, blk.offset))
            else:
                raise ValueError(f"unknown cone kind {blk.kind!r}")
        self.nonneg = np.asarray(nonneg, dtype=np.intp)
        psd.sort()
        count = len(psd)
        nmax = psd[-1][0] if count else 0
        self._mats = np.zeros((count, nmax, nmax), dtype=np.complex128)
        # per-entry gather/scatter maps between z and the padded batch
        diag_b: list[int] = []
        diag_i: list[int] = []
        diag_z: list[int] = []
        off_b: list[int] = []
        off_i: list[int] = []
        off_j: list[int] = []
        off_re: list[int] = []
        off_im: list[int] = []
        for b, (order, offset) in enumerate(psd):
            for d in range(order, nmax):
                self._mats[b, d, d] = self._PAD
            iu, ju = np.triu_indices(order, k=1)
            pairs = iu.size
            diag_b.extend([b] * order)
            diag_i.extend(range(order))
            diag_z.extend(range(offset, offset + order))
            off_b.extend([b] * pairs)
            off_i.extend(iu.tolist())
            off_j.extend(ju.tolist())
            off_re.extend((offset + order + np.arange(pairs)).tolist())
            off_im.extend((offset + order + pairs + np.arange(pairs)).tolist())
        self._diag = (np.asarray(diag_b), np.asarray(diag_i), np.asarray(diag_z))
        self._off = (
            np.asarray(off_b), np.asarray(off_i), np.asarray(off_j),
            np.asarray(off_re), np.asarray(off_im),
        )
        self._orders = np.asarray([o for o, _ in psd], dtype=np.intp)

    def _fill(self, z: np.ndarray) -> None:
        db, di, dz = self._diag
        ob, oi, oj, ore, oim = self._off
        mats = self._mats
        mats[db, di, di] = z[dz]
        off = (z[ore] + 1j * z[oim]) * (1.0 / _SQRT2)
        mats[ob, oi, oj] = off
        mats[ob, oj, oi] = off.conj()

    def project(self, z: np.ndarray) -> np.ndarray:
        out = z.copy()
        if self.nonneg.size:
            out[self.nonneg] = np.maximum(z[self.nonneg], 0.0)
        if not self._orders.size:
            return out
        self._fill(z)
        w, q = np.linalg.eigh(self._mats)
        needs = np.flatnonzero(w[:, 0] < 0.0)
        if not needs.size:
            return out
        wn = np.maximum(w[needs], 0.0)
        qn = q[needs]
        proj = (qn * wn[:, None, :]) @ qn.conj().swapaxes(1, 2)
        db, di, dz = self._diag
        ob, oi, oj, ore, oim = self._off
        keep = np.isin(db, needs)
        if np.any(keep):
            pos = np.searchsorted(needs, db[keep])
            out[dz[keep]] = proj[pos, di[keep], di[keep]].real
        keep = np.isin(ob, needs)
        if np.any(keep):
            pos = np.searchsorted(needs, ob[keep])
            sym = (proj[pos, oi[keep], oj[keep]] + proj[pos, oj[keep], oi[keep]].conj()) * 0.5
            out[ore[keep]] = _SQRT2 * sym.real
            out[oim[keep]] = _SQRT2 * sym.imag
        return out

    def distance(self, z: np.ndarray) -> float:
        return float(np.linalg.norm(z - self.project(z)))


# --- workspace ---------------------------------------------------------------


class Workspace:
    """Factorizations and geometry reused across solves of one program.

    The Cholesky factor of I + A'A depends only on the constraint matrix, so
    objective reweighting (see ``reweight_inner``) only refreshes the cheap
    offset vector.  Internally the objective is divided by an adaptive scale
    so primal and dual iterates have comparable norms (duals on this problem
    family run orders of magnitude larger than primals, which cripples the
    splitting iteration); all reported points and residuals are in original
    units.
    """

    def __init__(self, program: ConeProgram):
        self.program = program
        self.a = program.a_matrix.tocsr()
        self.at = self.a.T.tocsr()
        self.b = np.asarray(program.b, dtype=np.float64)
        self.m, self.n = self.a.shape
        self.geometry = _ConeGeometry(program.blocks)
        if self.geometry.total != self.m:
            raise ValueError("cone blocks do not cover the rows of A")
        gram = (self.at @ self.a).toarray()
        gram[np.arange(self.n), np.arange(self.n)] += 1.0
        self._chol = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        self._norm_b = float(np.linalg.norm(self.b))
        self._sigma = 1.0
        self.set_objective(program.objective)

    def set_objective(self, c) -> None:
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (self.n,):
            raise ValueError(f"objective must have length {self.n}")
        self.c = c.copy()
        self._norm_c = float(np.linalg.norm(self.c))
        self._refresh_scaled()

    def _refresh_scaled(self) -> None:
        self._c_int = self.c / self._sigma
        gx, gy = self._solve_quasidef(self._c_int, self.b)
        self._gx, self._gy = gx, gy
        self._gh = float(self._c_int @ gx + self.b @ gy)  # = h' M^{-1} h > 0

    def _set_sigma(self, sigma: float) -> None:
        self._sigma = float(min(max(sigma, 1e-6), 1e12))
        self._refresh_scaled()

    def _solve_quasidef(self, wx: np.ndarray, wy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # solve [[I, A'], [-A, I]] z = w by elimination through I + A'A
        zx = scipy.linalg.cho_solve(self._chol, wx - self.at @ wy, check_finite=False)
        return zx, wy + self.a @ zx

    def _project_affine(self, w: np.ndarray) -> np.ndarray:
        # apply (I + Q)^{-1} for the skew embedding matrix Q built from A, b, c
        n = self.n
        px, py = self._solve_quasidef(w[:n], w[n:-1])
        zt = (w[-1] + float(self._c_int @ px + self.b @ py)) / (1.0 + self._gh)
        out = np.empty_like(w)
        out[:n] = px - zt * self._gx
        out[n:-1] = py - zt * self._gy
        out[-1] = zt
        return out

    def _rebalance(self, u: np.ndarray, v: np.ndarray, x: np.ndarray,
                   y: np.ndarray, divisor: float) -> None:
        """Reset the internal dual scale from the candidate norm ratio.

        The fixed point maps exactly under this block rescale, so the
        iterate is remapped in place and momentum survives.  The divisor
        compensates the ratio's upward drift over the run: calibration on
        the target family put the best scale near half the early-iterate
        ratio (and a third of the converged one).
        """
        xn = float(np.linalg.norm(x))
        yn = float(np.linalg.norm(y))
        if xn <= 1e-12 or yn <= 1e-12:
            return
        target = yn / xn / divisor
        old = self._sigma
        if 0.5 < target / old < 2.0:
            return
        self._set_sigma(target)
        rho = self._sigma / old  # _set_sigma may clip
        u[self.n:-1] /= rho
        v[: self.n] /= rho
        v[-1] /= rho

    # -- residuals -------------------------------------------------------------

    def _residuals(self, x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, np.ndarray]:
        s = self.b - self.a @ x
        primal = self.geometry.distance(s) / (1.0 + self._norm_b)
        dual = float(np.linalg.norm(self.at @ y + self.c)) / (1.0 + self._norm_c)
        cx = float(self.c @ x)
        by = float(self.b @ y)
        gap = abs(cx + by) / (1.0 + abs(cx) + abs(by))
        return primal, dual, gap, s

    def solve(self, settings: SolverSettings | None = None) -> SolveResult:
        settings = settings or SolverSettings()
        n, m = self.n, self.m
        dim = n + m + 1
        u = np.zeros(dim)
        v = np.zeros(dim)
        u[-1] = 1.0
        rebalance_at = 500
        if settings.sigma is not None:
            self._set_sigma(settings.sigma)
        if settings.warm_start is not None:
            x0, y0, s0 = settings.warm_start
            xn = float(np.linalg.norm(x0))
            yn = float(np.linalg.norm(y0))
            if (settings.sigma is None and xn > 1e-9 and yn > 1e-9
                    and not 0.125 < yn / xn / self._sigma < 8.0):
                self._set_sigma(yn / xn / 3.0)  # converged ratios run high
            u[:n] = x0
            u[n:-1] = np.asarray(y0) / self._sigma
            v[n:-1] = s0
            rebalance_at = 2000  # only adjust if the warm start goes stale
        relax = settings.relaxation
        geometry = self.geometry
        best: SolveResult | None = None
        polish_gate = settings.polish_threshold
        polish_attempts = 0
        rebalance_pending = settings.auto_scale
        deadline = None if settings.time_limit is None else time.perf_counter() + settings.time_limit

        it = 0
        while it < settings.max_iterations:
            it += 1
            w = u + v
            ut = self._project_affine(w)
            r = relax * ut + (1.0 - relax) * u
            t = r - v
            unew = np.empty(dim)
            unew[:n] = t[:n]
            unew[n:-1] = geometry.project(t[n:-1])
            unew[-1] = max(t[-1], 0.0)
            v += unew - r
            u = unew
            scale = float(np.abs(u).max())
            if scale > 1e12:  # iteration is positively homogeneous in (u, v)
                u /= scale
                v /= scale

            if it % settings.check_interval and it > 10:
                continue

            tau = u[-1]
            unorm = float(np.linalg.norm(u[: n + m])) + 1e-300
            if tau > 1e-10 * unorm:
                x = u[:n] / tau
                y = self._sigma * u[n:-1] / tau
                primal, dual, gap, s = self._residuals(x, y)
                worst = max(primal, dual, gap)
                if best is None or worst < best.max_residual:
                    best = SolveResult(
                        x=x, y=y, s=geometry.project(s), status=MAX_ITERATIONS,
                        primal_residual=primal, dual_residual=dual, gap=gap, iterations=it,
                    )
                if worst <= settings.tolerance:
                    return SolveResult(
                        x=x, y=y, s=geometry.project(s), status=OPTIMAL,
                        primal_residual=primal, dual_residual=dual, gap=gap, iterations=it,
                    )
                if (
                    settings.polish
                    and settings.tolerance < settings.polish_threshold
                    and worst <= polish_gate
                    and polish_attempts < 10
                ):
                    polish_attempts += 1
                    polished = self._polish(x, y, settings.tolerance, it)
                    if polished is not None:
                        return polished
                    polish_gate *= 0.2  # retry once the iterate improves further
                if rebalance_pending and it >= rebalance_at and worst > 100.0 * settings.tolerance:
                    rebalance_pending = False
                    self._rebalance(u, v, x, y, divisor=2.0)

            if tau <= 1e-3 * unorm:
                # an infeasibility/unboundedness ray shows up as the
                # homogeneous variable collapsing relative to the iterate;
                # checking earlier can mistake small-noise iterates for rays
                cert = self._certificates(u, settings.certificate_tolerance, it)
                if cert is not None:
                    return cert
            if deadline is not None and time.perf_counter() > deadline:
                break

        if best is not None:
            return replace(best, iterations=it)
        tau = max(u[-1], 1e-300)
        x = u[:n] / tau
        y = self._sigma * u[n:-1] / tau
        primal, dual, gap, s = self._residuals(x, y)
        return SolveResult(
            x=x, y=y, s=self.geometry.project(s), status=MAX_ITERATIONS,
            primal_residual=primal, dual_residual=dual, gap=gap, iterations=it,
        )

    def _certificates(self, u: np.ndarray, cert_tol: float, it: int) -> SolveResult | None:
        n, m = self.n, self.m
        uy = u[n:-1]
        by = float(self.b @ uy)
        if by < -1e-12:
            y = uy / (-by)  # b.y = -1, y in the dual cone by construction
            res = float(np.linalg.norm(self.at @ y)) * max(1.0, self._norm_b)
            if res <= cert_tol:
                return SolveResult(
                    x=np.zeros(n), y=y, s=np.zeros(m), status=INFEASIBLE,
                    primal_residual=res, dual_residual=0.0, gap=0.0, iterations=it,
                )
        ux = u[:n]
        cx = float(self.c @ ux)
        if cx < -1e-12:
            x = ux / (-cx)  # c.x = -1, A x + s = 0 for some s in K
            sx = -(self.a @ x)
            res = self.geometry.distance(sx) * max(1.0, self._norm_c)
            if res <= cert_tol:
                return SolveResult(
                    x=x, y=np.zeros(m), s=self.geometry.project(sx), status=UNBOUNDED,
                    primal_residual=0.0, dual_residual=res, gap=0.0, iterations=it,
                )
        return None

    # -- active-face polish ------------------------------------------------------

    def _polish(self, x: np.ndarray, y: np.ndarray, tol: float, it: int) -> SolveResult | None:
        """Refine (x, y) by solving the KKT equations restricted to active faces.

        Each round classifies faces (scalar rows by comparing y_i with s_i,
        PSD blocks by the sign split of eig(S - Y)), pins the primal point to
        those faces in least squares, re-derives the dual face bases from the
        refreshed slack matrices, and fits the multipliers.  Face estimates
        sharpen with the iterate, so a few rounds contract the error rapidly.
        The result is kept only if independently verified residuals meet
        ``tol``.
        """
        worst_prev = np.inf
        for _ in range(5):
            scalars, faces = self._classify_faces(x, y)
            x_new = self._primal_stage(scalars, faces, x)
            if x_new is None:
                return None
            y_new = self._dual_stage(scalars, faces, x_new)
            if y_new is None:
                return None
            primal, dual, gap, s_new = self._residuals(x_new, y_new)
            cone_gap = self.geometry.distance(y_new) / (1.0 + float(np.linalg.norm(y_new)))
            worst = max(primal, dual, gap, cone_gap)
            if worst <= tol:
                return SolveResult(
                    x=x_new, y=y_new, s=self.geometry.project(s_new), status=OPTIMAL,
                    primal_residual=primal, dual_residual=max(dual, cone_gap), gap=gap,
                    iterations=it, polished=True,
                )
            if not worst < 0.5 * worst_prev:
                return None  # stalled: face classification is not improving
            worst_prev = worst
            x, y = x_new, y_new
        return None

    def _classify_faces(self, x: np.ndarray, y: np.ndarray):
        """Split constraints into pinned scalar rows and PSD dual-face bases."""
        s = self.b - self.a @ x
        scalars: list[int] = []
        faces: list[tuple] = []  # (block, minus_basis)
        for blk in self.program.blocks:
            if blk.kind == "nonneg" or blk.order == 1:
                for idx in range(blk.offset, blk.offset + blk.size):
                    if y[idx] > s[idx]:  # active: pin the row, keep its multiplier
                        scalars.append(idx)
                continue
            sl = slice(blk.offset, blk.offset + blk.size)
            smat = hermitian_unvec(s[sl], blk.order)
            ymat = hermitian_unvec(y[sl], blk.order)
            w = np.linalg.eigvalsh(smat - ymat)  # ascending
            k_minus = int(np.count_nonzero(w <= 0.0))
            # the sign split of s - y sets the face dimension, but its
            # eigenvectors inherit the dual error (duals run orders of
            # magnitude larger here); the slack's own small eigenspace is
            # accurate to the primal residual, so pin against that instead
            _, svecs = np.linalg.eigh(smat)
            faces.append((blk, svecs[:, :k_minus]))
        return scalars, faces

    def _primal_stage(self, scalars, faces, x0: np.ndarray) -> np.ndarray | None:
        """Least-squares fit of x to the pinned rows and slack face conditions."""
        n = self.n
        rows: list[np.ndarray] = []
        rhs: list[np.ndarray] = []
        for idx in scalars:
            rows.append(self.a[idx].toarray())
            rhs.append(self.b[idx : idx + 1])
        for blk, minus in faces:
            if minus.shape[1] == 0:
                continue
            lmat = _touching_rows(minus, blk.order)
            ab = self.a[blk.offset : blk.offset + blk.size].toarray()
            rows.append(lmat @ ab)
            rhs.append(lmat @ self.b[blk.offset : blk.offset + blk.size])
        if not rows:
            return x0.copy()
        big = np.vstack(rows)
        target = np.concatenate(rhs)
        return _tethered_lstsq(big, target, x0)

    def _dual_stage(self, scalars, faces, x_new: np.ndarray) -> np.ndarray | None:
        """Fit multipliers on the (refreshed) active faces to A' y = -c."""
        s_new = self.b - self.a @ x_new
        cols: list[np.ndarray] = []
        meta: list[tuple] = []
        for blk, minus in faces:
            k_minus = minus.shape[1]
            if k_minus == 0:
                continue
            sl = slice(blk.offset, blk.offset + blk.size)
            # the dual face is the near-null space of the polished slack matrix
            smat = hermitian_unvec(s_new[sl], blk.order)
            _, basis = np.linalg.eigh(smat)
            fresh = basis[:, :k_minus]
            fcols = _hvec_batch(np.einsum("ip,bpq,jq->bij", fresh, _hvec_basis(k_minus), fresh.conj()))
            ab = self.a[sl]
            cols.append(np.asarray(ab.T @ fcols.T))
            meta.append(("face", blk, fresh, k_minus))
        for idx in scalars:
            cols.append(self.a[idx].toarray().T)
            meta.append(("row", idx, None, 1))
        if not cols:
            return None
        dmat = np.hstack(cols)
        z = _tethered_lstsq(dmat, -self.c, np.zeros(dmat.shape[1]))
        if z is None:
            return None
        y_new = np.zeros(self.m)
        pos = 0
        for kind, ref, fresh, width in meta:
            if kind == "row":
                y_new[ref] = z[pos]
                pos += 1
                continue
            blk = ref
            wmat = hermitian_unvec(z[pos : pos + width * width], width)
            ymat = fresh @ wmat @ fresh.conj().T
            y_new[blk.offset : blk.offset + blk.size] = hermitian_vec((ymat + ymat.conj().T) / 2.0)
            pos += width * width
        return y_new


def _tethered_lstsq(big: np.ndarray, target: np.ndarray, anchor: np.ndarray) -> np.ndarray | None:
    """Regularized least squares pulled toward ``anchor`` on flat directions.

    Solves the normal equations of min ||big z - target||^2 + eps ||z - anchor||^2
    with one iterative-refinement pass; eps is tied to the Gram trace so rank
    deficiency is handled without biasing well-determined coordinates.
    """
    cols = big.shape[1]
    gram = big.T @ big
    ridge = 1e-12 * max(float(np.trace(gram)) / max(cols, 1), 1e-300)
    gram[np.arange(cols), np.arange(cols)] += ridge
    rhs = big.T @ target + ridge * anchor
    try:
        fac = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return None
    z = scipy.linalg.cho_solve(fac, rhs, check_finite=False)
    resid = rhs - gram @ z
    z += scipy.linalg.cho_solve(fac, resid, check_finite=False)
    return z


_BASIS_CACHE: dict[int, np.ndarray] = {}


def _hvec_basis(n: int) -> np.ndarray:
    """Stack of Hermitian matrices B_p with hermitian_vec(B_p) = e_p."""
    got = _BASIS_CACHE.get(n)
    if got is not None:
        return got
    out = np.zeros((n * n, n, n), dtype=np.complex128)
    for p in range(n):
        out[p, p, p] = 1.0
    iu, ju = np.triu_indices(n, k=1)
    npairs = iu.size
    for t in range(npairs):
        i, j = int(iu[t]), int(ju[t])
        out[n + t, i, j] = 1.0 / _SQRT2
        out[n + t, j, i] = 1.0 / _SQRT2
        out[n + npairs + t, i, j] = 1j / _SQRT2
        out[n + npairs + t, j, i] = -1j / _SQRT2
    _BASIS_CACHE[n] = out
    return out


def _touching_rows(minus: np.ndarray, order: int) -> np.ndarray:
    """Rows expressing 'rotated slack vanishes against the minus eigenspace'.

    Returns L with L @ hvec(S) = coordinates of U^H S U on every position
    whose row or column meets the minus space, U = [minus, plus].
    """
    k_minus = minus.shape[1]
    if k_minus == 0:
        return np.zeros((0, order * order))
    # complete minus to a unitary basis via the orthogonal-complement projector
    proj = np.eye(order, dtype=np.complex128) - minus @ minus.conj().T
    w, vecs = np.linalg.eigh((proj + proj.conj().T) / 2.0)
    plus = vecs[:, w > 0.5]
    full = np.concatenate([minus, plus], axis=1)
    basis = _hvec_basis(order)
    touch = _touching_positions(order, k_minus)
    sel = basis[touch]
    rotated = np.einsum("ip,bpq,jq->bij", full, sel, full.conj())
    return _hvec_batch(rotated)


def _touching_positions(order: int, k_minus: int) -> np.ndarray:
    """hvec positions (diag then Re then Im pairs) meeting the first k_minus axes."""
    idx = [p for p in range(k_minus)]
    iu, ju = np.triu_indices(order, k=1)
    npairs = iu.size
    for t in range(npairs):
        if iu[t] < k_minus:
            idx.append(order + t)
            idx.append(order + npairs + t)
    return np.asarray(idx, dtype=np.intp)


def solve(program: ConeProgram, settings: SolverSettings | None = None) -> SolveResult:
    """One-shot solve of a cone program (builds a fresh workspace)."""
    return Workspace(program).solve(settings)


def kkt_residuals(program: ConeProgram, x, y) -> KKTResiduals:
    """Independently recompute normalized KKT residuals at (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = program.a_matrix
    b = np.asarray(program.b, dtype=np.float64)
    c = np.asarray(program.objective, dtype=np.float64)
    geometry = _ConeGeometry(program.blocks)
    primal = geometry.distance(b - a @ x) / (1.0 + float(np.linalg.norm(b)))
    dual_eq = float(np.linalg.norm(a.T @ y + c)) / (1.0 + float(np.linalg.norm(c)))
    dual_cone = geometry.distance(y) / (1.0 + float(np.linalg.norm(y)))
    cx = float(c @ x)
    by = float(b @ y)
    gap = abs(cx + by) / (1.0 + abs(cx) + abs(by))
    return KKTResiduals(primal=primal, dual=max(dual_eq, dual_cone), gap=gap)
