//! Spectral graph convolution over a learnable electrode adjacency.
//!
//! The adjacency parameter `A` is turned into a scaled Laplacian in three
//! differentiable steps:
//!
//! 1. `Â = relu((A + Aᵀ) / 2)` with the diagonal forced to zero,
//! 2. `L = I − D^{-1/2} Â D^{-1/2}` with `D_ii = Σ_j Â_ij + 1e-6`,
//! 3. `L̃ = 2L / λmax − I`, with `λmax` the exact largest eigenvalue of
//!    `L` (Jacobi), differentiated as `∂λ/∂L = u uᵀ` for its unit
//!    eigenvector `u`.
//!
//! The Chebyshev filter is then `Σ_k T_k(L̃) X Θ_k` with `T_0 = I`,
//! `T_1 = L̃`, `T_k = 2 L̃ T_{k−1} − T_{k−2}`.

use crate::eigen::symmetric_eigen;
use crate::error::{shape_err, AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

pub const DEGREE_EPS: f64 = 1e-6;
impl<T: Real> Tape<T> {
    /// `L = I − D^{-1/2} Â D^{-1/2}` from the raw adjacency parameter.
    pub fn normalized_laplacian(&mut self, adjacency: Var) -> Result<Var> {
        let s = self.shape(adjacency).to_vec();
        if s.len() != 2 || s[0] != s[1] {
            return Err(shape_err("normalized_laplacian", "square [N, N]", &s));
        }
        let n = s[0];
        let av = self.value(adjacency).data();
        let half = T::from_f64_lossy(0.5);
        let eps = T::from_f64_lossy(DEGREE_EPS);
        let mut sym = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sym[i * n + j] = (av[i * n + j] + av[j * n + i]) * half;
                }
            }
        }
        let mask = self.kink_mask(sym.iter().map(|&v| v > T::zero()).collect())?;
        let ahat: Vec<T> = sym
            .iter()
            .zip(&mask)
            .map(|(&v, &on)| if on { v } else { T::zero() })
            .collect();
        let deg: Vec<T> = (0..n).map(|i| ahat[i * n..(i + 1) * n].iter().copied().sum::<T>() + eps).collect();
        let sinv: Vec<T> = deg.iter().map(|&d| T::one() / d.sqrt()).collect();
        let mut lap = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { T::one() } else { T::zero() };
                lap[i * n + j] = delta - sinv[i] * ahat[i * n + j] * sinv[j];
            }
        }
        let out = Tensor::new(&[n, n], lap)?;
        self.push("normalized_laplacian", out, &[adjacency], move |args| {
            let g = args.grad;
            // dÂ_ij from the direct term and through the degree of row i.
            let mut d_sinv = vec![T::zero(); n];
            for i in 0..n {
                let mut acc = T::zero();
                for j in 0..n {
                    acc = acc + (g[i * n + j] + g[j * n + i]) * ahat[i * n + j] * sinv[j];
                }
                d_sinv[i] = -acc;
            }
            let d_deg: Vec<T> = (0..n)
                .map(|i| d_sinv[i] * (-half) * sinv[i] / deg[i])
                .collect();
            let mut d_sym = vec![T::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    if i != j && mask[i * n + j] {
                        let d_ahat = -g[i * n + j] * sinv[i] * sinv[j] + d_deg[i];
                        d_sym[i * n + j] = d_ahat;
                    }
                }
            }
            let mut ga = vec![T::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        ga[i * n + j] = (d_sym[i * n + j] + d_sym[j * n + i]) * half;
                    }
                }
            }
            vec![Some(ga)]
        })
    }

    /// `2 L / λ − I` for a single-element `lambda`.
    pub fn rescale_laplacian(&mut self, laplacian: Var, lambda: Var) -> Result<Var> {
        let s = self.shape(laplacian).to_vec();
        if s.len() != 2 || s[0] != s[1] || self.value(lambda).len() != 1 {
            return Err(shape_err("rescale_laplacian", "L [N, N] and λ [1]", &s));
        }
        let n = s[0];
        let lam = self.value(lambda).data()[0];
        if lam <= T::zero() {
            return Err(AutodiffError::InvalidArgument {
                op: "rescale_laplacian",
                reason: format!("non-positive spectral radius estimate {lam}"),
            });
        }
        let two = T::from_f64_lossy(2.0);
        let lv = self.value(laplacian).data();
        let data = (0..n * n)
            .map(|idx| {
                let delta = if idx / n == idx % n { T::one() } else { T::zero() };
                two * lv[idx] / lam - delta
            })
            .collect();
        let out = Tensor::new(&[n, n], data)?;
        self.push("rescale_laplacian", out, &[laplacian, lambda], move |args| {
            let (lv, g) = (args.inputs[0].data(), args.grad);
            let lam = args.inputs[1].data()[0];
            let gl = args.needs[0].then(|| g.iter().map(|&gv| two * gv / lam).collect());
            let glam = args.needs[1].then(|| {
                let s: T = g.iter().zip(lv).map(|(&a, &b)| a * b).sum();
                vec![-two * s / (lam * lam)]
            });
            vec![gl, glam]
        })
    }

    /// Largest eigenvalue of a symmetric matrix, as a `[1]` tensor.
    pub fn spectral_radius(&mut self, mat: Var) -> Result<Var> {
        let s = self.shape(mat).to_vec();
        if s.len() != 2 || s[0] != s[1] || s[0] == 0 {
            return Err(shape_err("spectral_radius", "square [N, N]", &s));
        }
        let n = s[0];
        let m: Vec<f64> = self.value(mat).data().iter().map(|v| v.as_f64()).collect();
        let eig = symmetric_eigen(&m, n)?;
        let u = eig.vector(0).to_vec();
        let out = Tensor::new(&[1], vec![T::from_f64_lossy(eig.values[0])])?;
        self.push("spectral_radius", out, &[mat], move |args| {
            let g = args.grad[0];
            vec![Some((0..n * n).map(|idx| g * T::from_f64_lossy(u[idx / n] * u[idx % n])).collect())]
        })
    }

    /// Scaled Laplacian `L̃` with eigenvalues in `[-1, 1]` from a raw adjacency.
    pub fn scaled_laplacian(&mut self, adjacency: Var) -> Result<Var> {
        let lap = self.normalized_laplacian(adjacency)?;
        let lambda = self.spectral_radius(lap)?;
        self.rescale_laplacian(lap, lambda)
    }

    /// Chebyshev filter of order `order` (number of polynomial terms) on
    /// node features `x[B, N, Fin]` with a precomputed scaled Laplacian.
    /// `theta` is `[order·Fin, Fout]`: block `k` holds `Θ_k`.
    pub fn chebyshev_with_laplacian(
        &mut self,
        x: Var,
        scaled_laplacian: Var,
        theta: Var,
        bias: Option<Var>,
        order: usize,
    ) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() != 3 {
            return Err(shape_err("chebyshev_graph_conv", "x [B, N, F]", &sx));
        }
        if order == 0 {
            return Err(AutodiffError::InvalidArgument {
                op: "chebyshev_graph_conv",
                reason: "order must be at least 1".into(),
            });
        }
        let fin = sx[2];
        let st = self.shape(theta).to_vec();
        if st.len() != 2 || st[0] != order * fin {
            return Err(shape_err("chebyshev_graph_conv", format!("theta [{}, Fout]", order * fin), &st));
        }
        let mut terms = vec![x];
        if order > 1 {
            terms.push(self.graph_mix(scaled_laplacian, x)?);
        }
        for k in 2..order {
            let mixed = self.graph_mix(scaled_laplacian, terms[k - 1])?;
            let doubled = self.scale(mixed, T::from_f64_lossy(2.0))?;
            terms.push(self.sub(doubled, terms[k - 2])?);
        }
        let stacked = if terms.len() == 1 { x } else { self.concat_last(&terms)? };
        self.dense(stacked, theta, bias)
    }

    /// Full graph convolution from the raw learnable adjacency.
    pub fn chebyshev_graph_conv(
        &mut self,
        x: Var,
        adjacency: Var,
        theta: Var,
        bias: Option<Var>,
        order: usize,
    ) -> Result<Var> {
        let lt = self.scaled_laplacian(adjacency)?;
        self.chebyshev_with_laplacian(x, lt, theta, bias, order)
    }
}
