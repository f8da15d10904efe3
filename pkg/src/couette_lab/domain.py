"""Spectral grids, transforms and shearing-frame operators.

All fields live on a periodic box [0,Lx) x [0,Ly) x [0,Lz).  Spectral
coefficients follow the Fourier-series normalization: a constant field 1 has
coefficient 1 at mode (0,0,0), and wavenumbers carry the 2*pi/L factors
explicitly.  Real fields are stored in rfft layout (z-axis halved), so
Hermitian symmetry is structural.

The shearing frame x_bar = x - t*y turns the Couette transport term into the
time-dependent wavenumber eta_eff = eta - k*t; all moving-frame operators
(gradient, Laplacian, Leray projection) take the evaluation time explicitly.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from .threads import fft_workers


class FrequencyTriple(NamedTuple):
    """One wavenumber (k, eta, l); values carry the 2*pi/L factors."""

    k: float
    eta: float
    l: float


@dataclass(frozen=True)
class DomainConfig:
    Lx: float = 1.0
    Ly: float = 2.0
    Lz: float = 1.0
    Nx: int = 48
    Ny: int = 48
    Nz: int = 48

    def __post_init__(self):
        for name in ("Lx", "Ly", "Lz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("Nx", "Ny", "Nz"):
            n = getattr(self, name)
            if n < 4 or n % 2 != 0:
                raise ValueError(f"{name} must be even and >= 4, got {n}")


def laplacian_L_symbol(xi, t):
    """|xi_t|^2 = k^2 + (eta - k t)^2 + l^2 (nonnegative moving-frame symbol)."""
    k, eta, l = xi
    return k * k + (eta - k * t) ** 2 + l * l


class SpectralGrid:
    """3D collocation grid plus rfft-layout spectral machinery."""

    def __init__(self, config: DomainConfig):
        self.config = config
        self.Nx, self.Ny, self.Nz = config.Nx, config.Ny, config.Nz
        self.Lx, self.Ly, self.Lz = config.Lx, config.Ly, config.Lz
        self.shape_real = (self.Nx, self.Ny, self.Nz)
        self.Nzr = self.Nz // 2 + 1
        self.shape_spec = (self.Nx, self.Ny, self.Nzr)
        self.n_total = self.Nx * self.Ny * self.Nz
        # remap interval: smallest t with integral index shift n -> n - m
        self.t_remap = self.Lx / self.Ly

        self.mi = np.rint(sfft.fftfreq(self.Nx) * self.Nx).astype(int).reshape(-1, 1, 1)
        self.ni = np.rint(sfft.fftfreq(self.Ny) * self.Ny).astype(int).reshape(1, -1, 1)
        self.pi = np.arange(self.Nzr).reshape(1, 1, -1)
        self.kx = 2 * np.pi * self.mi / self.Lx
        self.ky = 2 * np.pi * self.ni / self.Ly
        self.kz = 2 * np.pi * self.pi / self.Lz

        cx, cy, cz = self.Nx // 3, self.Ny // 3, self.Nz // 3
        self.dealias_mask = (
            (np.abs(self.mi) <= cx) & (np.abs(self.ni) <= cy) & (self.pi <= cz)
        )
        # multiplicity of every stored mode under Hermitian completion
        w = np.full(self.Nzr, 2.0)
        w[0] = 1.0
        if self.Nz % 2 == 0:
            w[-1] = 1.0
        self.mode_weight = w.reshape(1, 1, -1)

        x = np.arange(self.Nx) * (self.Lx / self.Nx)
        y = np.arange(self.Ny) * (self.Ly / self.Ny)
        z = np.arange(self.Nz) * (self.Lz / self.Nz)
        self.x, self.y, self.z = np.meshgrid(x, y, z, indexing="ij")

    # -- transforms ---------------------------------------------------------

    def forward(self, f):
        if f.shape != self.shape_real:
            raise ValueError(f"sample grid {f.shape} does not match domain {self.shape_real}")
        return sfft.rfftn(f, workers=fft_workers()) / self.n_total

    def inverse(self, c):
        if c.shape != self.shape_spec:
            raise ValueError(f"coefficient grid {c.shape} does not match domain {self.shape_spec}")
        return sfft.irfftn(c * self.n_total, s=self.shape_real, workers=fft_workers())

    # -- shearing-frame wavenumbers -----------------------------------------

    def eta_true(self, remaps=0):
        """Physical eta of each stored slot after `remaps` reindexings."""
        return self.ky + self.kx * (remaps * self.t_remap)

    def eta_eff(self, t, remaps=0):
        """eta - k*t evaluated for the stored layout."""
        return self.ky + self.kx * (remaps * self.t_remap - t)

    def lap_L(self, t, remaps=0):
        ee = self.eta_eff(t, remaps)
        return self.kx**2 + ee**2 + self.kz**2

    # -- mode algebra ---------------------------------------------------------

    def dealias(self, c):
        return np.where(self.dealias_mask, c, 0.0)

    def x_average(self, c):
        return np.where(self.mi == 0, c, 0.0)

    def nonzero_part(self, c):
        return np.where(self.mi != 0, c, 0.0)

    def project_div_free(self, u, t=0.0, remaps=0):
        """Leray projection with the moving-frame gradient (k, eta-kt, l).

        u has shape (3, Nx, Ny, Nzr); the (0,0,0) mode passes through.
        """
        ee = self.eta_eff(t, remaps)
        lap = self.kx**2 + ee**2 + self.kz**2
        inv = np.where(lap > 0, 1.0 / np.where(lap > 0, lap, 1.0), 0.0)
        dot = self.kx * u[0] + ee * u[1] + self.kz * u[2]
        out = np.empty_like(u)
        out[0] = u[0] - self.kx * dot * inv
        out[1] = u[1] - ee * dot * inv
        out[2] = u[2] - self.kz * dot * inv
        return out

    def divergence(self, u, t=0.0, remaps=0):
        ee = self.eta_eff(t, remaps)
        return 1j * (self.kx * u[0] + ee * u[1] + self.kz * u[2])

    # -- norms ----------------------------------------------------------------

    def l2_norm(self, c):
        """sqrt(sum |c_xi|^2) over the full (Hermitian-completed) mode set."""
        c = np.asarray(c)
        return float(np.sqrt(np.sum(self.mode_weight * np.abs(c) ** 2)))

    def inner(self, a, b):
        """L2 pairing Re sum a conj(b) over the completed mode set."""
        return float(np.sum(self.mode_weight * (a * np.conj(b)).real))


class SpectralGrid2D:
    """(y,z) companion grid for x-independent (streak) dynamics."""

    def __init__(self, Ly, Lz, Ny, Nz):
        if Ny < 4 or Ny % 2 or Nz < 4 or Nz % 2:
            raise ValueError("Ny, Nz must be even and >= 4")
        self.Ly, self.Lz, self.Ny, self.Nz = Ly, Lz, Ny, Nz
        self.shape_real = (Ny, Nz)
        self.Nzr = Nz // 2 + 1
        self.shape_spec = (Ny, self.Nzr)
        self.n_total = Ny * Nz
        self.ni = np.rint(sfft.fftfreq(Ny) * Ny).astype(int).reshape(-1, 1)
        self.pi = np.arange(self.Nzr).reshape(1, -1)
        self.ky = 2 * np.pi * self.ni / Ly
        self.kz = 2 * np.pi * self.pi / Lz
        self.k2 = self.ky**2 + self.kz**2
        cy, cz = Ny // 3, Nz // 3
        self.dealias_mask = (np.abs(self.ni) <= cy) & (self.pi <= cz)
        w = np.full(self.Nzr, 2.0)
        w[0] = 1.0
        if Nz % 2 == 0:
            w[-1] = 1.0
        self.mode_weight = w.reshape(1, -1)
        y = np.arange(Ny) * (Ly / Ny)
        z = np.arange(Nz) * (Lz / Nz)
        self.y, self.z = np.meshgrid(y, z, indexing="ij")

    @classmethod
    def from_domain(cls, config: DomainConfig):
        return cls(config.Ly, config.Lz, config.Ny, config.Nz)

    def forward(self, f):
        if f.shape != self.shape_real:
            raise ValueError(f"sample grid {f.shape} does not match domain {self.shape_real}")
        return sfft.rfft2(f, workers=fft_workers()) / self.n_total

    def inverse(self, c):
        if c.shape != self.shape_spec:
            raise ValueError(f"coefficient grid {c.shape} does not match domain {self.shape_spec}")
        return sfft.irfft2(c * self.n_total, s=self.shape_real, workers=fft_workers())

    def dealias(self, c):
        return np.where(self.dealias_mask, c, 0.0)

    def l2_norm(self, c):
        return float(np.sqrt(np.sum(self.mode_weight * np.abs(np.asarray(c)) ** 2)))

    def inner(self, a, b):
        return float(np.sum(self.mode_weight * (a * np.conj(b)).real))
