"""Laplace-space Green's functions R(z) = (z + iH)^-1 of the cavity + emitter star.

Finite samples use the closed Schur-complement forms; disorder averages replace every
E_j by E_M - i sigma, which is exact for Lorentzian disorder whenever Re z > 0.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from app.core.config import Settings, settings as default_settings
from app.core.errors import ContractError, DomainError, PoleCollisionError, SizeGuardError
from app.core.validation import ensure_valid
from app.models import DisorderSample, PoleExpansion, SiteIndex, SiteKind, SystemParams

logger = logging.getLogger(__name__)

_CHUNK = 256


def _as_complex(z) -> Tuple[np.ndarray, bool]:
    array = np.asarray(z, dtype=np.complex128)
    return array, array.ndim == 0


def _scalar_or_array(value: np.ndarray, scalar: bool):
    return complex(value) if scalar else value


class GreensService:
    """Exact finite-sample and disorder-averaged resolvent elements."""

    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings

    # ==================== SITES ====================

    def _check_site(self, site: SiteIndex, count: int, operation: str) -> None:
        if site.kind == SiteKind.EMITTER and site.index > count:
            raise ContractError(f"emitter index {site.index} exceeds N={count}", operation)
        if site.kind == SiteKind.DARK and site.index > count - 1:
            raise ContractError(f"dark-state index {site.index} exceeds N-1={count - 1}", operation)

    def site_vector(self, site: SiteIndex, count: int) -> Optional[np.ndarray]:
        """Amplitudes of `site` on the emitters (None for the cavity)."""
        if site.kind == SiteKind.CAVITY:
            return None
        if site.kind == SiteKind.EMITTER:
            vector = np.zeros(count, dtype=np.complex128)
            vector[site.index - 1] = 1.0
            return vector
        if site.kind == SiteKind.BRIGHT:
            return np.full(count, 1.0 / np.sqrt(count), dtype=np.complex128)
        j = np.arange(1, count + 1)
        return np.exp(2j * np.pi * site.index * j / count) / np.sqrt(count)

    def _overlap_terms(self, x: SiteIndex, y: SiteIndex, count: int) -> Tuple[complex, complex, complex]:
        """(<x|y>, sum_i conj(x_i), sum_j y_j) for emitter-space sites without building vectors."""

        def total(site: SiteIndex) -> complex:
            if site.kind == SiteKind.BRIGHT:
                return complex(np.sqrt(count))
            if site.kind == SiteKind.EMITTER:
                return 1.0 + 0j
            return 0j

        def component(site: SiteIndex, j: int) -> complex:
            if site.kind == SiteKind.EMITTER:
                return 1.0 + 0j if site.index == j else 0j
            if site.kind == SiteKind.BRIGHT:
                return complex(1.0 / np.sqrt(count))
            return complex(np.exp(2j * np.pi * site.index * j / count) / np.sqrt(count))

        if x == y:
            overlap = 1.0 + 0j
        elif x.kind == SiteKind.EMITTER:
            overlap = component(y, x.index)
        elif y.kind == SiteKind.EMITTER:
            overlap = np.conj(component(x, y.index))
        else:
            # distinct bright/dark combinations are orthogonal Fourier modes
            overlap = 0j
        return complex(overlap), complex(np.conj(total(x))), total(y)

    def _check_collision(self, shifted: np.ndarray, energies: np.ndarray, z: np.ndarray, operation: str) -> None:
        scale = self.settings.POLE_COLLISION_TOL * np.maximum(1.0, np.abs(energies))
        hits = np.abs(shifted) < scale
        if np.any(hits):
            flat = np.argwhere(hits)[0]
            j = int(flat[-1])
            z_hit = z.reshape(-1)[int(flat[0])] if z.ndim else complex(z)
            raise PoleCollisionError(j + 1, complex(z_hit), operation)

    def _emitter_sums(self, z: np.ndarray, energies: np.ndarray, left, right, operation: str):
        """Blocked evaluation of s(a, b) = sum_j a_j b_j / (z + i E_j) for the requested weight pairs."""
        flat = z.reshape(-1)
        results = [np.empty(flat.shape, dtype=np.complex128) for _ in left]
        for start in range(0, flat.size, _CHUNK):
            block = flat[start:start + _CHUNK]
            inverse_denominator = block[:, None] + 1j * energies[None, :]
            self._check_collision(inverse_denominator, energies, block, operation)
            inverse_denominator = 1.0 / inverse_denominator
            for out, a, b in zip(results, left, right):
                weights = np.ones_like(energies, dtype=np.complex128)
                if a is not None:
                    weights = weights * a
                if b is not None:
                    weights = weights * b
                out[start:start + _CHUNK] = inverse_denominator @ weights
        return [out.reshape(z.shape) for out in results]

    # ==================== FINITE SAMPLES ====================

    def aux_cavity_energy(self, z, sample: DisorderSample, params: SystemParams):
        """E_C(z) = E_C - i g^2 sum_j 1/(z + i E_j)."""
        z_array, scalar = _as_complex(z)
        (total,) = self._emitter_sums(z_array, sample.energies, [None], [None], "greens.aux_cavity_energy")
        value = params.cavity_energy - 1j * params.coupling ** 2 * total
        return _scalar_or_array(value, scalar)

    def greens_element(self, x: SiteIndex, y: SiteIndex, z, sample: DisorderSample, params: SystemParams):
        """Element <x| (z + iH)^-1 |y> of one disorder sample; broadcasts over z."""
        operation = "greens.greens_element"
        count = sample.size
        if count != params.emitter_count:
            raise ContractError(f"sample has {count} energies but N={params.emitter_count}", operation)
        for site in (x, y):
            self._check_site(site, count, operation)

        z_array, scalar = _as_complex(z)
        g = params.coupling
        energies = sample.energies
        u = self.site_vector(x, count)
        v = self.site_vector(y, count)
        u_conj = None if u is None else np.conj(u)

        plain, left, right = self._emitter_sums(
            z_array, energies, [None, u_conj, None], [None, None, v], operation
        )
        zeta = z_array + 1j * params.cavity_energy + g ** 2 * plain
        if np.any(zeta == 0):
            raise PoleCollisionError(None, complex(z_array.reshape(-1)[np.argmax(zeta.reshape(-1) == 0)]), operation)

        if u is None and v is None:
            value = 1.0 / zeta
        elif u is None:
            value = -1j * g * right / zeta
        elif v is None:
            value = -1j * g * left / zeta
        else:
            (diagonal,) = self._emitter_sums(z_array, energies, [u_conj], [v], operation)
            value = diagonal - g ** 2 * left * right / zeta
        return _scalar_or_array(value, scalar)

    def resolvent_matrix(self, z: complex, sample: DisorderSample, params: SystemParams) -> np.ndarray:
        """Dense (z + iH)^-1 of the arrowhead Hamiltonian; small-N cross-check only."""
        hamiltonian = self.arrowhead_hamiltonian(sample, params)
        return linalg.inv(z * np.eye(hamiltonian.shape[0]) + 1j * hamiltonian)

    # ==================== DISORDER AVERAGES ====================

    def averaged_greens_element(self, x: SiteIndex, y: SiteIndex, z, params: SystemParams):
        """Lorentz-averaged element: every E_j replaced by E_M - i sigma."""
        operation = "greens.averaged_greens_element"
        ensure_valid(params, operation)
        count = params.emitter_count
        for site in (x, y):
            self._check_site(site, count, operation)

        z_array, scalar = _as_complex(z)
        g2 = params.coupling ** 2
        w = z_array + 1j * params.emitter_center + params.disorder_width
        shifted_cavity = z_array + 1j * params.cavity_energy
        determinant = shifted_cavity * w + g2 * count
        if np.any(w == 0) or np.any(determinant == 0):
            raise PoleCollisionError(None, complex(z_array.reshape(-1)[0]), operation)

        if x.kind == SiteKind.CAVITY and y.kind == SiteKind.CAVITY:
            value = w / determinant
        elif x.kind == SiteKind.CAVITY or y.kind == SiteKind.CAVITY:
            other = y if x.kind == SiteKind.CAVITY else x
            _, conj_total, total = self._overlap_terms(other, other, count)
            weight = total if x.kind == SiteKind.CAVITY else conj_total
            value = -1j * np.sqrt(g2) * weight / determinant
        else:
            overlap, conj_total, total = self._overlap_terms(x, y, count)
            value = overlap / w - g2 * conj_total * total / (w * determinant)
        return _scalar_or_array(np.asarray(value, dtype=np.complex128) * np.ones_like(z_array), scalar)

    def averaged_cavity_element(self, z, params: SystemParams, emitter_count: Optional[int] = None):
        """R_CC averaged over `emitter_count` emitters (defaults to N)."""
        count = params.emitter_count if emitter_count is None else emitter_count
        z_array = np.asarray(z, dtype=np.complex128)
        w = z_array + 1j * params.emitter_center + params.disorder_width
        value = w / ((z_array + 1j * params.cavity_energy) * w + params.coupling ** 2 * count)
        return complex(value) if value.ndim == 0 else value

    def averaged_donor_element(self, z, donor_energy: float, params: SystemParams):
        """G_{1,1} averaged over the N-1 other emitters with the donor held at E1."""
        ensure_valid(params, "greens.averaged_donor_element")
        z_array = np.asarray(z, dtype=np.complex128)
        others = self.averaged_cavity_element(z_array, params, params.emitter_count - 1)
        value = 1.0 / (z_array + 1j * donor_energy + params.coupling ** 2 * others)
        return complex(value) if value.ndim == 0 else value

    # ==================== TRANSPORT ====================

    def acceptor_donor_element(self, z, sample: DisorderSample, params: SystemParams, reservoir) -> complex:
        """G_{N,1} of the transport model with the Lorentz-averaged reservoir self-energy."""
        operation = "greens.acceptor_donor_element"
        if sample.size < 2:
            raise ContractError("transport needs a donor and a distinct acceptor (N >= 2)", operation)
        z_array, scalar = _as_complex(z)
        g2 = params.coupling ** 2
        energies = sample.energies
        donor_shift = z_array + 1j * energies[0]
        (middle,) = self._emitter_sums(z_array, energies[:-1], [None], [None], operation)
        zeta_cavity = z_array + 1j * params.cavity_energy + g2 * middle
        self_energy = reservoir.reservoir_strength / (
            z_array + 1j * reservoir.reservoir_center + reservoir.reservoir_width
        )
        zeta_acceptor = z_array + 1j * energies[-1] + self_energy + g2 / zeta_cavity
        value = -g2 / (zeta_acceptor * zeta_cavity * donor_shift)
        return _scalar_or_array(value, scalar)

    # ==================== POLES ====================

    def arrowhead_hamiltonian(self, sample: DisorderSample, params: SystemParams) -> np.ndarray:
        count = sample.size
        hamiltonian = np.zeros((count + 1, count + 1), dtype=np.float64)
        hamiltonian[0, 0] = params.cavity_energy
        hamiltonian[0, 1:] = params.coupling
        hamiltonian[1:, 0] = params.coupling
        hamiltonian[np.arange(1, count + 1), np.arange(1, count + 1)] = self._break_ties(sample.energies)
        return hamiltonian

    @staticmethod
    def _break_ties(energies: np.ndarray) -> np.ndarray:
        """Shift coincident energies apart by one ulp each."""
        order = np.argsort(energies, kind="stable")
        ordered = energies[order].copy()
        for i in range(1, ordered.size):
            if ordered[i] <= ordered[i - 1]:
                ordered[i] = np.nextafter(ordered[i - 1], np.inf)
        result = np.empty_like(ordered)
        result[order] = ordered
        return result

    def _guard(self, count: int, operation: str) -> None:
        if count > self.settings.MAX_DENSE_EMITTERS:
            raise SizeGuardError(
                f"N={count} exceeds MAX_DENSE_EMITTERS={self.settings.MAX_DENSE_EMITTERS}; "
                "use the disorder-averaged analytic path instead",
                operation,
            )

    def char_poly_poles(self, sample: DisorderSample, params: SystemParams) -> PoleExpansion:
        """All N+1 roots z = -i E_a of the characteristic polynomial (dense arrowhead eigensolve)."""
        self._guard(sample.size, "greens.char_poly_poles")
        eigenvalues = linalg.eigvalsh(self.arrowhead_hamiltonian(sample, params))
        return PoleExpansion(poles=-1j * eigenvalues)

    def pole_expansion(self, x: SiteIndex, y: SiteIndex, sample: DisorderSample, params: SystemParams) -> PoleExpansion:
        """Poles and residues A_a = <x|a><a|y> of R_xy."""
        operation = "greens.pole_expansion"
        self._guard(sample.size, operation)
        for site in (x, y):
            self._check_site(site, sample.size, operation)
        eigenvalues, eigenvectors = linalg.eigh(self.arrowhead_hamiltonian(sample, params))

        def embed(site: SiteIndex) -> np.ndarray:
            vector = np.zeros(sample.size + 1, dtype=np.complex128)
            emitter_part = self.site_vector(site, sample.size)
            if emitter_part is None:
                vector[0] = 1.0
            else:
                vector[1:] = emitter_part
            return vector

        left = np.conj(embed(x)) @ eigenvectors
        right = eigenvectors.T @ embed(y)
        return PoleExpansion(poles=-1j * eigenvalues, amplitudes=left * right)

    def inverse_laplace(self, expansion: PoleExpansion, t):
        """sum_a A_a exp(z_a t) for t >= 0."""
        if expansion.amplitudes is None:
            raise ContractError("pole expansion carries no residues", "greens.inverse_laplace")
        times = np.asarray(t, dtype=np.float64)
        if np.any(times < 0):
            raise DomainError("retarded Green's function is undefined for t < 0", "greens.inverse_laplace")
        value = np.exp(np.multiply.outer(times, expansion.poles)) @ expansion.amplitudes
        return complex(value) if times.ndim == 0 else value


greens_service = GreensService()
