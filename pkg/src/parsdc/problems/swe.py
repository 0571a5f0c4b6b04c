r"""Planar rotating shallow water in vorticity-divergence spectral form.

The doubly periodic f-plane shallow-water equations are advanced for the
geopotential anomaly :math:`\Phi' = \Phi - \bar\Phi`, relative vorticity
:math:`\zeta = \partial_x v - \partial_y u` and divergence
:math:`\delta = \partial_x u + \partial_y v`:

.. math::

   \partial_t \Phi' &= -\bar\Phi \delta \;-\; \nabla\cdot(\Phi' V), \\
   \partial_t \zeta &= -\nabla\cdot\big[(f_0 + \zeta) V\big], \\
   \partial_t \delta &= \hat k\cdot\nabla\times\big[(f_0 + \zeta) V\big]
                         \;-\; \nabla^2 \tfrac{|V|^2}{2} \;-\; \nabla^2 \Phi'.

The linear gravity-wave part :math:`L_g: (\Phi', \zeta, \delta) \mapsto
(-\bar\Phi\delta,\, 0,\, -\nabla^2\Phi')` is treated implicitly; everything
else (Coriolis, advection, kinetic-energy and remainder terms, optional
:math:`-\nu\nabla^4` hyperviscosity) is the explicit tendency.  Because
:math:`L_g` is diagonal per Fourier mode, the implicit solve
:math:`u - \alpha L_g(u) = \beta` reduces to a scalar Helmholtz update,

.. math::

   \hat\Phi' = \frac{\hat\beta_\Phi - \alpha \bar\Phi \hat\beta_\delta}
                    {1 + \alpha^2 \bar\Phi k^2}, \qquad
   \hat\delta = \hat\beta_\delta + \alpha k^2 \hat\Phi', \qquad
   \hat\zeta = \hat\beta_\zeta,

with :math:`k^2 = k_x^2 + k_y^2` the non-negative Laplacian symbol.

The state is the flat concatenation of the three Hermitian-packed spectra
:math:`(\hat\Phi', \hat\zeta, \hat\delta)` on an :math:`N\times N` grid (real
transforms over the second axis, row-major wavenumber order).  Forward
transforms are unnormalized, inverse transforms divide by :math:`N^2`.
Nonlinear terms are formed pointwise on the grid and the resulting tendencies
are truncated by the 2/3 rule; states built by this module are band-limited,
so products are alias-free by the classical argument.  Velocity is recovered
through the Helmholtz decomposition :math:`V = \nabla^\perp\psi + \nabla\chi`
with :math:`\nabla^2\psi = \zeta`, :math:`\nabla^2\chi = \delta` and zero mean
flow; the mean modes of :math:`\zeta` and :math:`\delta` must vanish and the
mean of :math:`\Phi'` is conserved by every tendency term.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft

from ..core import SplitProblem
from ..errors import ParameterError, ValidationError

SNAPSHOT_MAGIC = b"PSWSNAP1"


class PlanarShallowWater(SplitProblem):
    """Pseudo-spectral planar shallow-water problem.

    Parameters
    ----------
    n_grid : int
        Grid points per direction; even and at least 8.
    domain_length : float
        Periodic box size L in meters.
    mean_geopotential : float
        Background geopotential (g times mean depth), positive.
    coriolis : float
        Constant Coriolis parameter f0 of the f-plane.
    hyperviscosity : float
        Coefficient of the optional -nu * laplacian^2 damping, default 0.
    space_threads : int
        Worker threads handed to the FFT backend.  Results are bitwise
        independent of this value; it is never inherited from the
        environment.
    """

    def __init__(
        self,
        n_grid,
        domain_length,
        mean_geopotential,
        coriolis,
        hyperviscosity=0.0,
        space_threads=1,
    ):
        super().__init__()
        if not isinstance(n_grid, (int, np.integer)) or n_grid < 8 or n_grid % 2:
            raise ParameterError(f"n_grid must be an even integer >= 8, got {n_grid!r}")
        if domain_length <= 0.0:
            raise ParameterError("domain_length must be positive")
        if mean_geopotential <= 0.0:
            raise ParameterError("mean_geopotential must be positive")
        if hyperviscosity < 0.0:
            raise ParameterError("hyperviscosity must be non-negative")
        if not isinstance(space_threads, (int, np.integer)) or space_threads < 1:
            raise ParameterError("space_threads must be a positive integer")
        self.n_grid = int(n_grid)
        self.domain_length = float(domain_length)
        self.mean_geopotential = float(mean_geopotential)
        self.coriolis = float(coriolis)
        self.hyperviscosity = float(hyperviscosity)
        self.space_threads = int(space_threads)

        n = self.n_grid
        spacing = self.domain_length / n
        self.wavenumbers_x = 2.0 * np.pi * np.fft.fftfreq(n, d=spacing)
        self.wavenumbers_y = 2.0 * np.pi * np.fft.rfftfreq(n, d=spacing)
        kx = self.wavenumbers_x[:, None]
        ky = self.wavenumbers_y[None, :]
        self._ikx = 1j * kx
        self._iky = 1j * ky
        self.laplacian_symbol = kx**2 + ky**2
        self._inv_k2 = np.zeros_like(self.laplacian_symbol)
        nonzero = self.laplacian_symbol > 0.0
        self._inv_k2[nonzero] = 1.0 / self.laplacian_symbol[nonzero]

        # 2/3 rule, strict: products of kept modes must alias outside the kept
        # band, which needs keep < N / 3 (N // 3 fails when 3 divides N)
        keep = (n - 1) // 3
        index_x = np.rint(self.wavenumbers_x / (2.0 * np.pi / self.domain_length))
        index_y = np.rint(self.wavenumbers_y / (2.0 * np.pi / self.domain_length))
        self.dealias_mask = (np.abs(index_x)[:, None] <= keep) & (
            np.abs(index_y)[None, :] <= keep
        )

        self._spectral_shape = (n, n // 2 + 1)
        self.state_size = 3 * n * (n // 2 + 1)

    @property
    def n_dof(self):
        return self.n_grid**2

    # -- state layout -----------------------------------------------------

    def spectral_views(self, state):
        """Zero-copy (phi, zeta, delta) views of a flat state."""
        n, nh = self._spectral_shape
        stacked = state.reshape(3, n, nh)
        return stacked[0], stacked[1], stacked[2]

    def pack(self, phi, zeta, delta):
        """Flat state from three spectral fields (copies its inputs)."""
        out = np.empty((3,) + self._spectral_shape, dtype=complex)
        out[0], out[1], out[2] = phi, zeta, delta
        return out.reshape(self.state_size)

    def _to_physical(self, spec):
        n = self.n_grid
        return scipy.fft.irfft2(spec, s=(n, n), workers=self.space_threads)

    def _to_spectral(self, field):
        return scipy.fft.rfft2(field, workers=self.space_threads)

    # -- split tendencies --------------------------------------------------

    def _f_impl(self, state):
        phi, zeta, delta = self.spectral_views(state)
        out = np.empty((3,) + self._spectral_shape, dtype=complex)
        out[0] = -self.mean_geopotential * delta
        out[1] = 0.0
        out[2] = self.laplacian_symbol * phi
        return out.reshape(self.state_size)

    def _implicit_solve(self, alpha, beta, guess):
        beta_phi, beta_zeta, beta_delta = self.spectral_views(beta)
        out = np.empty((3,) + self._spectral_shape, dtype=complex)
        denominator = 1.0 + alpha**2 * self.mean_geopotential * self.laplacian_symbol
        out[0] = (beta_phi - alpha * self.mean_geopotential * beta_delta) / denominator
        out[1] = beta_zeta
        out[2] = beta_delta + alpha * self.laplacian_symbol * out[0]
        return out.reshape(self.state_size)

    def _f_expl(self, state):
        phi, zeta, delta = self.spectral_views(state)
        u, v = self._velocity(zeta, delta)
        zeta_phys = self._to_physical(zeta)
        phi_phys = self._to_physical(phi)

        q = self.coriolis + zeta_phys
        flux_x = self._to_spectral(q * u)
        flux_y = self._to_spectral(q * v)
        kinetic = self._to_spectral(0.5 * (u * u + v * v))
        mass_x = self._to_spectral(phi_phys * u)
        mass_y = self._to_spectral(phi_phys * v)

        out = np.empty((3,) + self._spectral_shape, dtype=complex)
        out[0] = -(self._ikx * mass_x + self._iky * mass_y)
        out[1] = -(self._ikx * flux_x + self._iky * flux_y)
        out[2] = (self._ikx * flux_y - self._iky * flux_x) + self.laplacian_symbol * kinetic
        if self.hyperviscosity > 0.0:
            out[0] -= self.hyperviscosity * self.laplacian_symbol**2 * phi
            out[1] -= self.hyperviscosity * self.laplacian_symbol**2 * zeta
            out[2] -= self.hyperviscosity * self.laplacian_symbol**2 * delta
        out *= self.dealias_mask
        return out.reshape(self.state_size)

    # -- diagnostics -------------------------------------------------------

    def _velocity(self, zeta, delta):
        psi = -zeta * self._inv_k2
        chi = -delta * self._inv_k2
        u = self._to_physical(-self._iky * psi + self._ikx * chi)
        v = self._to_physical(self._ikx * psi + self._iky * chi)
        return u, v

    def velocity_from_state(self, state):
        """Physical (u, v) from the Helmholtz decomposition, zero mean flow."""
        _, zeta, delta = self.spectral_views(state)
        scale = max(np.linalg.norm(zeta), np.linalg.norm(delta), 1.0)
        for name, field in (("vorticity", zeta), ("divergence", delta)):
            if abs(field[0, 0]) > 1e-12 * scale:
                raise ValidationError(
                    f"mean {name} mode must vanish, got {field[0, 0]!r}"
                )
        return self._velocity(zeta, delta)

    def vorticity_physical(self, state):
        _, zeta, _ = self.spectral_views(state)
        return self._to_physical(zeta)

    def error_field(self, state):
        """Field entering the benchmark error norm: physical vorticity."""
        return self.vorticity_physical(state)

    def mean_geopotential_anomaly(self, state):
        phi, _, _ = self.spectral_views(state)
        return phi[0, 0].real / self.n_grid**2

    def total_energy(self, state):
        """Domain-mean energy density (geopotential units)."""
        phi, zeta, delta = self.spectral_views(state)
        u, v = self._velocity(zeta, delta)
        phi_phys = self._to_physical(phi)
        kinetic = 0.5 * (self.mean_geopotential + phi_phys) * (u * u + v * v)
        potential = 0.5 * phi_phys**2
        return float(np.mean(kinetic + potential))

    # -- snapshots -----------------------------------------------------------

    def export_snapshot_json(self, path, state, time=0.0):
        """Lossless JSON export for small grids (real/imag float pairs)."""
        parts = []
        for view in self.spectral_views(state):
            parts.append(
                [[[value.real, value.imag] for value in row] for row in view]
            )
        payload = {
            "format": SNAPSHOT_MAGIC.decode(),
            "n_grid": self.n_grid,
            "domain_length": self.domain_length,
            "mean_geopotential": self.mean_geopotential,
            "coriolis": self.coriolis,
            "hyperviscosity": self.hyperviscosity,
            "time": time,
            "fields": {"phi": parts[0], "zeta": parts[1], "delta": parts[2]},
        }
        with open(path, "w") as handle:
            json.dump(payload, handle)

    def import_snapshot_json(self, path):
        with open(path) as handle:
            payload = json.load(handle)
        if payload.get("format") != SNAPSHOT_MAGIC.decode():
            raise ValidationError(f"{path} is not a shallow-water snapshot")
        if payload["n_grid"] != self.n_grid:
            raise ValidationError(
                f"snapshot grid {payload['n_grid']} does not match problem "
                f"grid {self.n_grid}"
            )
        fields = []
        for name in ("phi", "zeta", "delta"):
            rows = payload["fields"][name]
            fields.append(
                np.array([[complex(re, im) for re, im in row] for row in rows])
            )
        return self.pack(*fields)


_HEADER = struct.Struct("<Idddddd")


def write_snapshot(path, problem, state, time=0.0):
    """Binary snapshot: magic, grid/physics header, three packed spectra."""
    phi, zeta, delta = problem.spectral_views(state)
    with open(path, "wb") as handle:
        handle.write(SNAPSHOT_MAGIC)
        handle.write(
            _HEADER.pack(
                problem.n_grid,
                problem.domain_length,
                problem.mean_geopotential,
                problem.coriolis,
                problem.hyperviscosity,
                time,
                0.0,  # reserved
            )
        )
        for view in (phi, zeta, delta):
            handle.write(np.ascontiguousarray(view, dtype=complex).tobytes())


def read_snapshot(path):
    """Read a binary snapshot; returns (metadata dict, flat state)."""
    with open(path, "rb") as handle:
        magic = handle.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValidationError(f"{path} is not a shallow-water snapshot")
        header = handle.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValidationError(f"{path} is truncated")
        n_grid, length, phi_bar, coriolis, nu, time, _ = _HEADER.unpack(header)
        count = 3 * n_grid * (n_grid // 2 + 1)
        data = np.frombuffer(handle.read(), dtype=complex)
        if data.size != count:
            raise ValidationError(
                f"{path} holds {data.size} coefficients, expected {count}"
            )
    meta = {
        "n_grid": int(n_grid),
        "domain_length": length,
        "mean_geopotential": phi_bar,
        "coriolis": coriolis,
        "hyperviscosity": nu,
        "time": time,
    }
    return meta, data.copy()


@dataclass(frozen=True)
class JetConfig:
    """Barotropic jet initial condition parameters.

    ``y_center`` and ``width`` default to L / 2 and L / 15 of the problem the
    jet is built for.  The perturbation adds
    ``amplitude * u_max * cos(2 pi k x / L) * exp(-((y - y0) / width)^2)``
    to the meridional velocity.
    """

    u_max: float = 80.0
    y_center: float = None
    width: float = None
    perturbation_amplitude: float = 1e-4
    perturbation_wavenumber: int = 3


def jet_initial_condition(problem, config=None):
    """Geostrophically balanced zonal jet with an optional perturbation.

    The zonal profile is ``u(y) = u_max * sech((y - y0) / width)**2``; the
    geopotential anomaly solves the discrete balance
    ``d(phi')/dy = -f0 * u(y)`` spectrally with zero mean, which makes the
    unperturbed jet steady to roundoff for the discrete tendencies.
    """
    if config is None:
        config = JetConfig()
    length = problem.domain_length
    y_center = length / 2.0 if config.y_center is None else config.y_center
    width = length / 15.0 if config.width is None else config.width
    if width <= 0.0 or config.u_max <= 0.0:
        raise ParameterError("jet width and peak velocity must be positive")

    n = problem.n_grid
    coords = np.arange(n) * length / n
    y = coords[None, :]
    x = coords[:, None]
    u_profile = config.u_max / np.cosh((y - y_center) / width) ** 2
    u_phys = np.broadcast_to(u_profile, (n, n))
    v_phys = (
        config.perturbation_amplitude
        * config.u_max
        * np.cos(2.0 * np.pi * config.perturbation_wavenumber * x / length)
        * np.exp(-(((y - y_center) / width) ** 2))
    )

    u_hat = problem._to_spectral(np.ascontiguousarray(u_phys))
    v_hat = problem._to_spectral(v_phys)
    u_hat *= problem.dealias_mask
    v_hat *= problem.dealias_mask

    ikx = problem._ikx
    iky = problem._iky
    zeta = ikx * v_hat - iky * u_hat
    delta = ikx * u_hat + iky * v_hat
    zeta[0, 0] = 0.0
    delta[0, 0] = 0.0

    # spectral integration of the balance equation, zero-mean anomaly
    ky = problem.wavenumbers_y[None, :]
    phi = np.zeros_like(u_hat)
    nonzero = np.broadcast_to(ky != 0.0, u_hat.shape)
    phi[nonzero] = (
        -problem.coriolis * u_hat[nonzero] / (1j * np.broadcast_to(ky, u_hat.shape)[nonzero])
    )
    return problem.pack(phi, zeta, delta)
