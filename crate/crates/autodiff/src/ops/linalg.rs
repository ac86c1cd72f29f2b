//! Matrix products: plain, batched, dense layers and shared-left mixing.

use crate::error::{shape_err, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{matmul_into, Real, Tensor};

impl<T: Real> Tape<T> {
    /// `a[m,k] @ b[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", format!("[_, {}]", sb.first().copied().unwrap_or(0)), &sa));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut c = vec![T::zero(); m * n];
        matmul_into(m, k, n, self.value(a).data(), false, self.value(b).data(), false, &mut c, false);
        let out = Tensor::new(&[m, n], c)?;
        self.push("matmul", out, &[a, b], move |args| {
            let (av, bv, g) = (args.inputs[0].data(), args.inputs[1].data(), args.grad);
            let ga = args.needs[0].then(|| {
                let mut ga = vec![T::zero(); m * k];
                matmul_into(m, n, k, g, false, bv, true, &mut ga, false);
                ga
            });
            let gb = args.needs[1].then(|| {
                let mut gb = vec![T::zero(); k * n];
                matmul_into(k, m, n, av, true, g, false, &mut gb, false);
                gb
            });
            vec![ga, gb]
        })
    }

    /// Affine map over the last axis: `x[.., in] @ w[in, out] + b[out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let fan_in = *sx.last().unwrap_or(&0);
        if sw.len() != 2 || sw[0] != fan_in {
            return Err(shape_err("dense", format!("weight [{fan_in}, _]"), &sw));
        }
        let fan_out = sw[1];
        if let Some(b) = b {
            if self.shape(b) != [fan_out] {
                return Err(shape_err("dense", format!("bias [{fan_out}]"), self.shape(b)));
            }
        }
        let rows = self.value(x).len() / fan_in.max(1);
        let mut y = vec![T::zero(); rows * fan_out];
        matmul_into(rows, fan_in, fan_out, self.value(x).data(), false, self.value(w).data(), false, &mut y, false);
        if let Some(b) = b {
            let bv = self.value(b).data();
            for row in y.chunks_mut(fan_out) {
                row.iter_mut().zip(bv).for_each(|(a, &b)| *a = *a + b);
            }
        }
        let mut out_shape = sx.clone();
        *out_shape.last_mut().unwrap() = fan_out;
        let out = Tensor::new(&out_shape, y)?;
        let parents: Vec<Var> = match b {
            Some(b) => vec![x, w, b],
            None => vec![x, w],
        };
        self.push("dense", out, &parents, move |args| {
            let (xv, wv, g) = (args.inputs[0].data(), args.inputs[1].data(), args.grad);
            let gx = args.needs[0].then(|| {
                let mut gx = vec![T::zero(); rows * fan_in];
                matmul_into(rows, fan_out, fan_in, g, false, wv, true, &mut gx, false);
                gx
            });
            let gw = args.needs[1].then(|| {
                let mut gw = vec![T::zero(); fan_in * fan_out];
                matmul_into(fan_in, rows, fan_out, xv, true, g, false, &mut gw, false);
                gw
            });
            let mut grads = vec![gx, gw];
            if args.needs.len() == 3 {
                grads.push(args.needs[2].then(|| {
                    let mut gb = vec![T::zero(); fan_out];
                    for row in g.chunks(fan_out) {
                        gb.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
                    }
                    gb
                }));
            }
            grads
        })
    }

    /// Batched product `a[n,m,k] @ b[n,k,p]`, or `a @ b^T` with `b[n,p,k]`
    /// when `trans_b`.
    pub fn bmm(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(shape_err("bmm", "two rank-3 tensors with equal batch", &sb));
        }
        let (nb, m, k) = (sa[0], sa[1], sa[2]);
        let (kb, p) = if trans_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if kb != k {
            return Err(shape_err("bmm", format!("inner dimension {k}"), &sb));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut c = vec![T::zero(); nb * m * p];
        for i in 0..nb {
            matmul_into(
                m,
                k,
                p,
                &av[i * m * k..(i + 1) * m * k],
                false,
                &bv[i * k * p..(i + 1) * k * p],
                trans_b,
                &mut c[i * m * p..(i + 1) * m * p],
                false,
            );
        }
        let out = Tensor::new(&[nb, m, p], c)?;
        self.push("bmm", out, &[a, b], move |args| {
            let (av, bv, g) = (args.inputs[0].data(), args.inputs[1].data(), args.grad);
            let ga = args.needs[0].then(|| {
                let mut ga = vec![T::zero(); nb * m * k];
                for i in 0..nb {
                    // dA = G @ B^T (or G @ B when B was read transposed)
                    matmul_into(
                        m,
                        p,
                        k,
                        &g[i * m * p..(i + 1) * m * p],
                        false,
                        &bv[i * k * p..(i + 1) * k * p],
                        !trans_b,
                        &mut ga[i * m * k..(i + 1) * m * k],
                        false,
                    );
                }
                ga
            });
            let gb = args.needs[1].then(|| {
                let mut gb = vec![T::zero(); nb * k * p];
                for i in 0..nb {
                    let (ai, gi) = (&av[i * m * k..(i + 1) * m * k], &g[i * m * p..(i + 1) * m * p]);
                    let dst = &mut gb[i * k * p..(i + 1) * k * p];
                    if trans_b {
                        // dB[p,k] = G^T @ A
                        matmul_into(p, m, k, gi, true, ai, false, dst, false);
                    } else {
                        // dB[k,p] = A^T @ G
                        matmul_into(k, m, p, ai, true, gi, false, dst, false);
                    }
                }
                gb
            });
            vec![ga, gb]
        })
    }

    /// `m[n,n] @ x[b]` for every batch slice of `x[b, n, f]`.
    pub fn graph_mix(&mut self, mat: Var, x: Var) -> Result<Var> {
        let (sm, sx) = (self.shape(mat).to_vec(), self.shape(x).to_vec());
        if sm.len() != 2 || sm[0] != sm[1] || sx.len() != 3 || sx[1] != sm[0] {
            return Err(shape_err("graph_mix", format!("[_, {}, _] against {:?}", sm[0], sm), &sx));
        }
        let (nb, n, f) = (sx[0], sx[1], sx[2]);
        let (mv, xv) = (self.value(mat).data(), self.value(x).data());
        let mut y = vec![T::zero(); nb * n * f];
        for b in 0..nb {
            matmul_into(n, n, f, mv, false, &xv[b * n * f..(b + 1) * n * f], false, &mut y[b * n * f..(b + 1) * n * f], false);
        }
        let out = Tensor::new(&sx, y)?;
        self.push("graph_mix", out, &[mat, x], move |args| {
            let (mv, xv, g) = (args.inputs[0].data(), args.inputs[1].data(), args.grad);
            let gm = args.needs[0].then(|| {
                let mut gm = vec![T::zero(); n * n];
                for b in 0..nb {
                    matmul_into(n, f, n, &g[b * n * f..(b + 1) * n * f], false, &xv[b * n * f..(b + 1) * n * f], true, &mut gm, true);
                }
                gm
            });
            let gx = args.needs[1].then(|| {
                let mut gx = vec![T::zero(); nb * n * f];
                for b in 0..nb {
                    matmul_into(n, n, f, mv, true, &g[b * n * f..(b + 1) * n * f], false, &mut gx[b * n * f..(b + 1) * n * f], false);
                }
                gx
            });
            vec![gm, gx]
        })
    }
}
