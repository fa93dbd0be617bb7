//! Rotating-frame Hamiltonian of a driven NV-13C spin pair and its
//! dressed-state spectrum.
//!
//! Basis order is fixed throughout the crate as
//! `|0,up>, |0,down>, |1,up>, |1,down>` where the first quantum number is
//! the NV electron state (reduced two-level basis) and the arrow is the
//! 13C nuclear spin projection. In that basis the Hamiltonian reads
//!
//! ```text
//!         | -fn/2      0        W/2          0       |
//!         |  0        +fn/2     0            W/2     |
//!   H  =  |  W/2       0        d-fn/2+a/2   Azx/2   |
//!         |  0         W/2      Azx/2        d+fn/2-a/2 |
//! ```
//!
//! with `d = f - f+`, `W` the Rabi frequency, `fn` the nuclear Larmor
//! frequency and `a = Azz`. All entries are hertz.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::constants::{D_ZFS_HZ, GAMMA_NUC_HZ_PER_T, GAMMA_NV_HZ_PER_T, K0_HZ_NM3};
use crate::error::{CoreError, Result};

/// Static field, microwave drive, and the derived transition frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConditions {
    b0_t: f64,
    rabi_hz: f64,
    f_plus_hz: f64,
    f_n_hz: f64,
    f_plus_overridden: bool,
}

impl ExperimentConditions {
    /// Conditions at field `b0_t` (tesla) and Rabi frequency `rabi_hz` (Hz).
    ///
    /// The NV transition frequency defaults to `D + gamma_nv * B0` and the
    /// nuclear Larmor frequency is always `gamma_nuc * B0`.
    pub fn new(b0_t: f64, rabi_hz: f64) -> Result<Self> {
        if !(b0_t > 0.0) || !b0_t.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "b0_t",
                message: format!("must be a positive field in tesla, got {b0_t}"),
            });
        }
        if !(rabi_hz >= 0.0) || !rabi_hz.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "rabi_hz",
                message: format!("must be a nonnegative frequency in Hz, got {rabi_hz}"),
            });
        }
        Ok(Self {
            b0_t,
            rabi_hz,
            f_plus_hz: D_ZFS_HZ + GAMMA_NV_HZ_PER_T * b0_t,
            f_n_hz: GAMMA_NUC_HZ_PER_T * b0_t,
            f_plus_overridden: false,
        })
    }

    /// Override the NV transition frequency (e.g. a measured value).
    pub fn with_f_plus(mut self, f_plus_hz: f64) -> Result<Self> {
        if !(f_plus_hz > 0.0) || !f_plus_hz.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "f_plus_hz",
                message: format!("must be a positive frequency in Hz, got {f_plus_hz}"),
            });
        }
        self.f_plus_hz = f_plus_hz;
        self.f_plus_overridden = true;
        Ok(self)
    }

    /// Same field, different Rabi frequency.
    pub fn with_rabi(&self, rabi_hz: f64) -> Result<Self> {
        let mut out = Self::new(self.b0_t, rabi_hz)?;
        if self.f_plus_overridden {
            out = out.with_f_plus(self.f_plus_hz)?;
        }
        Ok(out)
    }

    /// Same drive, different field. Re-derives `f_n` and, unless it was
    /// explicitly overridden, `f_plus`.
    pub fn with_b0(&self, b0_t: f64) -> Result<Self> {
        let mut out = Self::new(b0_t, self.rabi_hz)?;
        if self.f_plus_overridden {
            out = out.with_f_plus(self.f_plus_hz)?;
        }
        Ok(out)
    }

    pub fn b0(&self) -> f64 {
        self.b0_t
    }

    pub fn rabi(&self) -> f64 {
        self.rabi_hz
    }

    /// NV |0> <-> |1> transition frequency (Hz).
    pub fn f_plus(&self) -> f64 {
        self.f_plus_hz
    }

    /// 13C Larmor frequency (Hz).
    pub fn f_n(&self) -> f64 {
        self.f_n_hz
    }
}

/// Dipolar geometry a hyperfine coupling was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolarGeometry {
    /// Dipolar coupling magnitude A0 (Hz).
    pub a0_hz: f64,
    /// Polar angle of the NV-13C displacement (rad).
    pub theta_rad: f64,
    /// Displacement (nm), when the coupling came from a distance.
    pub r_nm: Option<f64>,
}

/// Secular hyperfine pair (Azz, Azx), optionally with its geometric origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineCoupling {
    a_zz_hz: f64,
    a_zx_hz: f64,
    geometry: Option<DipolarGeometry>,
}

impl HyperfineCoupling {
    /// Couplings given directly (Hz).
    pub fn new(a_zz_hz: f64, a_zx_hz: f64) -> Self {
        Self {
            a_zz_hz,
            a_zx_hz,
            geometry: None,
        }
    }

    /// Couplings from a dipolar magnitude `a0_hz` and polar angle:
    /// `Azz = A0 (1 + 3 cos 2t)/2`, `Azx = 3 A0 sin(2t)/2`.
    pub fn from_magnitude(a0_hz: f64, theta_rad: f64) -> Result<Self> {
        if !(a0_hz >= 0.0) || !a0_hz.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "a0_hz",
                message: format!("must be a nonnegative magnitude in Hz, got {a0_hz}"),
            });
        }
        let two_theta = 2.0 * theta_rad;
        Ok(Self {
            a_zz_hz: a0_hz * (1.0 + 3.0 * two_theta.cos()) / 2.0,
            a_zx_hz: 1.5 * a0_hz * two_theta.sin(),
            geometry: Some(DipolarGeometry {
                a0_hz,
                theta_rad,
                r_nm: None,
            }),
        })
    }

    /// Couplings from a displacement `r_nm` (nm) via `A0 = k0 / r^3`.
    pub fn from_distance(r_nm: f64, theta_rad: f64) -> Result<Self> {
        if !(r_nm > 0.0) || !r_nm.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "r_nm",
                message: format!("must be a positive distance in nm, got {r_nm}"),
            });
        }
        let a0 = K0_HZ_NM3 / r_nm.powi(3);
        let mut out = Self::from_magnitude(a0, theta_rad)?;
        if let Some(g) = out.geometry.as_mut() {
            g.r_nm = Some(r_nm);
        }
        Ok(out)
    }

    pub fn a_zz(&self) -> f64 {
        self.a_zz_hz
    }

    pub fn a_zx(&self) -> f64 {
        self.a_zx_hz
    }

    pub fn geometry(&self) -> Option<&DipolarGeometry> {
        self.geometry.as_ref()
    }
}

/// Bare product states, in the fixed basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BareState {
    /// |0,up>
    ZeroUp,
    /// |0,down>
    ZeroDown,
    /// |1,up>
    OneUp,
    /// |1,down>
    OneDown,
}

impl BareState {
    pub const ALL: [BareState; 4] = [
        BareState::ZeroUp,
        BareState::ZeroDown,
        BareState::OneUp,
        BareState::OneDown,
    ];

    /// Index in the fixed basis order.
    pub fn index(&self) -> usize {
        match self {
            BareState::ZeroUp => 0,
            BareState::ZeroDown => 1,
            BareState::OneUp => 2,
            BareState::OneDown => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        BareState::ALL.get(index).copied()
    }

    /// NV electron quantum number (0 or 1).
    pub fn electron(&self) -> u8 {
        (self.index() >= 2) as u8
    }

    /// True for nuclear spin up.
    pub fn nucleus_up(&self) -> bool {
        self.index() % 2 == 0
    }

    pub fn label(&self) -> &'static str {
        match self {
            BareState::ZeroUp => "|0,up>",
            BareState::ZeroDown => "|0,down>",
            BareState::OneUp => "|1,up>",
            BareState::OneDown => "|1,down>",
        }
    }
}

/// Dressed-state labels psi_1 .. psi_4.
///
/// Labels follow descending eigenfrequency order at the frequency where a
/// spectrum is first computed. For a sweep starting far below resonance
/// this reproduces the conventional assignment psi_1 = |0,down>,
/// psi_2 = |0,up> at the sweep start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DressedLabel {
    Psi1,
    Psi2,
    Psi3,
    Psi4,
}

impl DressedLabel {
    pub const ALL: [DressedLabel; 4] = [
        DressedLabel::Psi1,
        DressedLabel::Psi2,
        DressedLabel::Psi3,
        DressedLabel::Psi4,
    ];

    /// Zero-based storage index.
    pub fn index(&self) -> usize {
        match self {
            DressedLabel::Psi1 => 0,
            DressedLabel::Psi2 => 1,
            DressedLabel::Psi3 => 2,
            DressedLabel::Psi4 => 3,
        }
    }

    /// One-based label as written psi_j.
    pub fn number(&self) -> usize {
        self.index() + 1
    }

    /// From a one-based label number.
    pub fn from_number(n: usize) -> Option<Self> {
        match n {
            1 => Some(DressedLabel::Psi1),
            2 => Some(DressedLabel::Psi2),
            3 => Some(DressedLabel::Psi3),
            4 => Some(DressedLabel::Psi4),
            _ => None,
        }
    }
}

/// The 4x4 rotating-frame Hamiltonian at a given drive frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatingFrameHamiltonian {
    matrix: Matrix4<Complex64>,
    drive_hz: f64,
}

impl RotatingFrameHamiltonian {
    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.matrix
    }

    /// Drive frequency the matrix was built at (Hz).
    pub fn drive_frequency(&self) -> f64 {
        self.drive_hz
    }

    /// Frobenius norm (Hz), used to scale residual tolerances.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// Real trace (Hz).
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// Build the rotating-frame Hamiltonian at drive frequency `f_hz`.
pub fn build_hamiltonian(
    f_hz: f64,
    cond: &ExperimentConditions,
    hf: &HyperfineCoupling,
) -> RotatingFrameHamiltonian {
    let re = |x: f64| Complex64::new(x, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let fn_half = cond.f_n() / 2.0;
    let detuning = f_hz - cond.f_plus();
    let half_rabi = cond.rabi() / 2.0;
    let half_azx = hf.a_zx() / 2.0;
    let half_azz = hf.a_zz() / 2.0;

    let matrix = Matrix4::new(
        re(-fn_half),
        zero,
        re(half_rabi),
        zero,
        //
        zero,
        re(fn_half),
        zero,
        re(half_rabi),
        //
        re(half_rabi),
        zero,
        re(detuning - fn_half + half_azz),
        re(half_azx),
        //
        zero,
        re(half_rabi),
        re(half_azx),
        re(detuning + fn_half - half_azz),
    );
    RotatingFrameHamiltonian {
        matrix,
        drive_hz: f_hz,
    }
}

/// Eigenfrequencies and eigenvectors of a [`RotatingFrameHamiltonian`],
/// carrying the psi_1..psi_4 label assignment.
#[derive(Debug, Clone)]
pub struct DressedSpectrum {
    /// Eigenfrequency of psi_{k+1} (Hz).
    frequencies: [f64; 4],
    /// Column k is the eigenvector of psi_{k+1}.
    vectors: Matrix4<Complex64>,
    /// Drive frequency the spectrum belongs to.
    drive_hz: f64,
}

impl DressedSpectrum {
    /// Assemble a spectrum whose label assignment was produced elsewhere
    /// (e.g. chained along a sweep).
    pub(crate) fn from_parts(
        frequencies: [f64; 4],
        vectors: Matrix4<Complex64>,
        drive_hz: f64,
    ) -> Self {
        Self {
            frequencies,
            vectors,
            drive_hz,
        }
    }

    pub fn frequency(&self, label: DressedLabel) -> f64 {
        self.frequencies[label.index()]
    }

    pub fn frequencies(&self) -> &[f64; 4] {
        &self.frequencies
    }

    pub fn vector(&self, label: DressedLabel) -> Vector4<Complex64> {
        self.vectors.column(label.index()).into_owned()
    }

    /// Eigenvector matrix; column k is psi_{k+1}.
    pub fn vectors(&self) -> &Matrix4<Complex64> {
        &self.vectors
    }

    pub fn drive_frequency(&self) -> f64 {
        self.drive_hz
    }

    /// Bare state with the largest weight in each labeled eigenvector,
    /// with the squared overlap.
    pub fn bare_identities(&self) -> [(BareState, f64); 4] {
        let mut out = [(BareState::ZeroUp, 0.0); 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut best = (0usize, 0.0f64);
            for i in 0..4 {
                let w = self.vectors[(i, k)].norm_sqr();
                if w > best.1 {
                    best = (i, w);
                }
            }
            *slot = (BareState::from_index(best.0).unwrap(), best.1);
        }
        out
    }

    /// Populations of `amplitudes` in this dressed basis, label order.
    pub fn populations(&self, amplitudes: &Vector4<Complex64>) -> [f64; 4] {
        let coeffs = self.vectors.adjoint() * amplitudes;
        [
            coeffs[0].norm_sqr(),
            coeffs[1].norm_sqr(),
            coeffs[2].norm_sqr(),
            coeffs[3].norm_sqr(),
        ]
    }
}

/// Raw Hermitian eigendecomposition sorted by descending eigenvalue.
///
/// Eigenvector phases are canonicalized so the largest-magnitude component
/// is real and nonnegative.
pub(crate) fn sorted_eigensystem(h: &RotatingFrameHamiltonian) -> ([f64; 4], Matrix4<Complex64>) {
    let eig = nalgebra::SymmetricEigen::new(h.matrix);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });

    let mut frequencies = [0.0; 4];
    let mut vectors = Matrix4::zeros();
    for (k, &src) in order.iter().enumerate() {
        frequencies[k] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        // Phase convention: largest component real >= 0.
        let mut pivot = 0usize;
        let mut best = 0.0f64;
        for i in 0..4 {
            let w = col[i].norm_sqr();
            if w > best {
                best = w;
                pivot = i;
            }
        }
        let phase = if col[pivot].norm() > 0.0 {
            col[pivot].conj() / col[pivot].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..4 {
            vectors[(i, k)] = col[i] * phase;
        }
    }
    (frequencies, vectors)
}

/// Relabel sorted eigenpairs by maximal overlap with a previous spectrum.
///
/// Returns the permutation `perm` such that new label k takes sorted
/// column `perm[k]`, or `None` if any assigned pair has overlap^2 < 0.5.
pub(crate) fn continuity_assignment(
    prev_vectors: &Matrix4<Complex64>,
    sorted_vectors: &Matrix4<Complex64>,
) -> (Option<[usize; 4]>, [usize; 4], [f64; 4]) {
    // overlap[i][k] = |<sorted_i | prev_k>|^2
    let mut overlap = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let mut dot = Complex64::new(0.0, 0.0);
            for row in 0..4 {
                dot += sorted_vectors[(row, i)].conj() * prev_vectors[(row, k)];
            }
            overlap[i][k] = dot.norm_sqr();
        }
    }

    // Best assignment over all 24 permutations of sorted columns to labels.
    const PERMS: [[usize; 4]; 24] = [
        [0, 1, 2, 3],
        [0, 1, 3, 2],
        [0, 2, 1, 3],
        [0, 2, 3, 1],
        [0, 3, 1, 2],
        [0, 3, 2, 1],
        [1, 0, 2, 3],
        [1, 0, 3, 2],
        [1, 2, 0, 3],
        [1, 2, 3, 0],
        [1, 3, 0, 2],
        [1, 3, 2, 0],
        [2, 0, 1, 3],
        [2, 0, 3, 1],
        [2, 1, 0, 3],
        [2, 1, 3, 0],
        [2, 3, 0, 1],
        [2, 3, 1, 0],
        [3, 0, 1, 2],
        [3, 0, 2, 1],
        [3, 1, 0, 2],
        [3, 1, 2, 0],
        [3, 2, 0, 1],
        [3, 2, 1, 0],
    ];
    let mut best_perm = PERMS[0];
    let mut best_total = f64::NEG_INFINITY;
    for perm in PERMS {
        let total: f64 = (0..4).map(|k| overlap[perm[k]][k]).sum();
        if total > best_total {
            best_total = total;
            best_perm = perm;
        }
    }
    let overlaps = [
        overlap[best_perm[0]][0],
        overlap[best_perm[1]][1],
        overlap[best_perm[2]][2],
        overlap[best_perm[3]][3],
    ];
    let ok = overlaps.iter().all(|&o| o >= 0.5);
    (ok.then_some(best_perm), best_perm, overlaps)
}

fn spectrum_from_permuted(
    frequencies: &[f64; 4],
    vectors: &Matrix4<Complex64>,
    perm: &[usize; 4],
    drive_hz: f64,
) -> DressedSpectrum {
    let mut freqs = [0.0; 4];
    let mut cols = Matrix4::zeros();
    for k in 0..4 {
        freqs[k] = frequencies[perm[k]];
        cols.set_column(k, &vectors.column(perm[k]));
    }
    DressedSpectrum {
        frequencies: freqs,
        vectors: cols,
        drive_hz,
    }
}

/// Diagonalize `h` into a labeled [`DressedSpectrum`].
///
/// Without `prev`, labels are assigned in descending eigenfrequency order,
/// which matches the bare-state identities in the far-detuned limit. With
/// `prev`, each label is carried over to the new eigenvector of maximal
/// overlap (adiabatic continuity); an assignment whose best overlap^2
/// drops below 0.5 is reported as a label ambiguity.
pub fn dressed_states(
    h: &RotatingFrameHamiltonian,
    prev: Option<&DressedSpectrum>,
) -> Result<DressedSpectrum> {
    let (frequencies, vectors) = sorted_eigensystem(h);
    match prev {
        None => Ok(spectrum_from_permuted(
            &frequencies,
            &vectors,
            &[0, 1, 2, 3],
            h.drive_frequency(),
        )),
        Some(prev) => {
            let (ok, perm, overlaps) = continuity_assignment(&prev.vectors, &vectors);
            if ok.is_none() {
                let (label, &overlap_sq) = overlaps
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                return Err(CoreError::LabelAmbiguity {
                    label: label + 1,
                    overlap_sq,
                });
            }
            Ok(spectrum_from_permuted(
                &frequencies,
                &vectors,
                &perm,
                h.drive_frequency(),
            ))
        }
    }
}

/// Result of an avoided-crossing gap search.
#[derive(Debug, Clone, Copy)]
pub struct GapSearch {
    /// Minimum frequency splitting |nu_j - nu_k| found (Hz).
    pub gap_hz: f64,
    /// Drive frequency at the minimum (Hz).
    pub f_at_min_hz: f64,
    /// False when the minimum sat on a window boundary.
    pub interior: bool,
}

/// Minimum splitting between dressed levels `j` and `k` over a drive
/// frequency window.
///
/// A coarse grid scan (`grid_step_hz`, 1 kHz by default via
/// [`avoided_crossing_gap`]) brackets the minimum, which is then refined
/// by golden-section search to 1 Hz. A minimum on the window edge is
/// returned with `interior = false`.
pub fn avoided_crossing_gap_with_step(
    j: DressedLabel,
    k: DressedLabel,
    cond: &ExperimentConditions,
    hf: &HyperfineCoupling,
    window_hz: (f64, f64),
    grid_step_hz: f64,
) -> Result<GapSearch> {
    if j == k {
        return Err(CoreError::InvalidParameter {
            name: "j,k",
            message: "gap requires two distinct labels".into(),
        });
    }
    let (lo, hi) = window_hz;
    if !(hi > lo) {
        return Err(CoreError::InvalidParameter {
            name: "window_hz",
            message: format!("window must satisfy lo < hi, got ({lo}, {hi})"),
        });
    }
    if !(lo <= cond.f_plus() && cond.f_plus() <= hi) {
        return Err(CoreError::InvalidParameter {
            name: "window_hz",
            message: "window must contain f_plus".into(),
        });
    }
    if !(grid_step_hz > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "grid_step_hz",
            message: "grid step must be positive".into(),
        });
    }

    let split = |f: f64| -> f64 {
        let (freqs, _) = sorted_eigensystem(&build_hamiltonian(f, cond, hf));
        (freqs[j.index()] - freqs[k.index()]).abs()
    };

    let n = ((hi - lo) / grid_step_hz).ceil() as usize;
    let mut best_i = 0usize;
    let mut best = f64::INFINITY;
    let mut grid = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let f = lo + (hi - lo) * (i as f64) / (n as f64);
        let g = split(f);
        grid.push(f);
        if g < best {
            best = g;
            best_i = i;
        }
    }

    if best_i == 0 || best_i == n {
        return Ok(GapSearch {
            gap_hz: best,
            f_at_min_hz: grid[best_i],
            interior: false,
        });
    }

    // Golden-section refinement on the bracketing triple.
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = grid[best_i - 1];
    let mut b = grid[best_i + 1];
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = split(c);
    let mut fd = split(d);
    while (b - a).abs() > 1.0 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = split(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = split(d);
        }
    }
    let f_min = 0.5 * (a + b);
    Ok(GapSearch {
        gap_hz: split(f_min),
        f_at_min_hz: f_min,
        interior: true,
    })
}

/// [`avoided_crossing_gap_with_step`] with the default 1 kHz coarse grid.
pub fn avoided_crossing_gap(
    j: DressedLabel,
    k: DressedLabel,
    cond: &ExperimentConditions,
    hf: &HyperfineCoupling,
    window_hz: (f64, f64),
) -> Result<GapSearch> {
    avoided_crossing_gap_with_step(j, k, cond, hf, window_hz, 1e3)
}
