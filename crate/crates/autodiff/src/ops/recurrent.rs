//! Single LSTM layer with back-propagation through time.

use crate::error::{shape_err, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{matmul_into, Real, Tensor};

fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Real> Tape<T> {
    /// Runs a standard four-gate LSTM cell over `x[B, T, in]` from a zero
    /// state and returns every hidden state `[B, T, h]`.
    ///
    /// `w_ih[in, 4h]`, `w_hh[h, 4h]` and `bias[4h]` hold the gate blocks in
    /// the order input, forget, cell, output.
    pub fn lstm_layer(&mut self, x: Var, w_ih: Var, w_hh: Var, bias: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() != 3 {
            return Err(shape_err("lstm_layer", "x [B, T, in]", &sx));
        }
        let (nb, steps, n_in) = (sx[0], sx[1], sx[2]);
        let swh = self.shape(w_hh).to_vec();
        if swh.len() != 2 || swh[1] != 4 * swh[0] {
            return Err(shape_err("lstm_layer", "w_hh [h, 4h]", &swh));
        }
        let h = swh[0];
        let g4 = 4 * h;
        if self.shape(w_ih) != [n_in, g4] {
            return Err(shape_err("lstm_layer", format!("w_ih [{n_in}, {g4}]"), self.shape(w_ih)));
        }
        if self.shape(bias) != [g4] {
            return Err(shape_err("lstm_layer", format!("bias [{g4}]"), self.shape(bias)));
        }
        let rows = nb * steps;
        let mut xw = vec![T::zero(); rows * g4];
        matmul_into(rows, n_in, g4, self.value(x).data(), false, self.value(w_ih).data(), false, &mut xw, false);
        let whh = self.value(w_hh).data().to_vec();
        let bv = self.value(bias).data().to_vec();

        let mut gates = vec![T::zero(); steps * nb * g4];
        let mut cells = vec![T::zero(); steps * nb * h];
        let mut tanh_c = vec![T::zero(); steps * nb * h];
        let mut hidden = vec![T::zero(); steps * nb * h];
        let mut z = vec![T::zero(); nb * g4];
        for t in 0..steps {
            for b in 0..nb {
                let src = &xw[(b * steps + t) * g4..(b * steps + t + 1) * g4];
                z[b * g4..(b + 1) * g4]
                    .iter_mut()
                    .zip(src.iter().zip(&bv))
                    .for_each(|(d, (&s, &bb))| *d = s + bb);
            }
            if t > 0 {
                let hp = &hidden[(t - 1) * nb * h..t * nb * h];
                matmul_into(nb, h, g4, hp, false, &whh, false, &mut z, true);
            }
            for b in 0..nb {
                let zr = &z[b * g4..(b + 1) * g4];
                let gr = &mut gates[(t * nb + b) * g4..(t * nb + b + 1) * g4];
                for j in 0..h {
                    gr[j] = sigmoid(zr[j]);
                    gr[h + j] = sigmoid(zr[h + j]);
                    gr[2 * h + j] = zr[2 * h + j].tanh();
                    gr[3 * h + j] = sigmoid(zr[3 * h + j]);
                }
                for j in 0..h {
                    let c_prev = if t > 0 { cells[((t - 1) * nb + b) * h + j] } else { T::zero() };
                    let c = gr[h + j] * c_prev + gr[j] * gr[2 * h + j];
                    let idx = (t * nb + b) * h + j;
                    cells[idx] = c;
                    tanh_c[idx] = c.tanh();
                    hidden[idx] = gr[3 * h + j] * tanh_c[idx];
                }
            }
        }
        let mut out = vec![T::zero(); nb * steps * h];
        for t in 0..steps {
            for b in 0..nb {
                out[(b * steps + t) * h..(b * steps + t + 1) * h]
                    .copy_from_slice(&hidden[(t * nb + b) * h..(t * nb + b + 1) * h]);
            }
        }
        let out = Tensor::new(&[nb, steps, h], out)?;
        self.push("lstm_layer", out, &[x, w_ih, w_hh, bias], move |args| {
            let (xv, wih, g) = (args.inputs[0].data(), args.inputs[1].data(), args.grad);
            let mut dz_all = vec![T::zero(); rows * g4];
            let mut dwhh = vec![T::zero(); h * g4];
            let mut dh_next = vec![T::zero(); nb * h];
            let mut dc_next = vec![T::zero(); nb * h];
            let mut dz = vec![T::zero(); nb * g4];
            for t in (0..steps).rev() {
                for b in 0..nb {
                    let gr = &gates[(t * nb + b) * g4..(t * nb + b + 1) * g4];
                    for j in 0..h {
                        let idx = (t * nb + b) * h + j;
                        let dh = g[(b * steps + t) * h + j] + dh_next[b * h + j];
                        let (ig, fg, cg, og) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                        let tc = tanh_c[idx];
                        let d_o = dh * tc;
                        let dc = dh * og * (T::one() - tc * tc) + dc_next[b * h + j];
                        let c_prev = if t > 0 { cells[((t - 1) * nb + b) * h + j] } else { T::zero() };
                        dc_next[b * h + j] = dc * fg;
                        let zr = &mut dz[b * g4..(b + 1) * g4];
                        zr[j] = dc * cg * ig * (T::one() - ig);
                        zr[h + j] = dc * c_prev * fg * (T::one() - fg);
                        zr[2 * h + j] = dc * ig * (T::one() - cg * cg);
                        zr[3 * h + j] = d_o * og * (T::one() - og);
                    }
                }
                if t > 0 {
                    let hp = &hidden[(t - 1) * nb * h..t * nb * h];
                    matmul_into(h, nb, g4, hp, true, &dz, false, &mut dwhh, true);
                    matmul_into(nb, g4, h, &dz, false, &whh, true, &mut dh_next, false);
                } else {
                    dh_next.iter_mut().for_each(|v| *v = T::zero());
                }
                for b in 0..nb {
                    dz_all[(b * steps + t) * g4..(b * steps + t + 1) * g4]
                        .copy_from_slice(&dz[b * g4..(b + 1) * g4]);
                }
            }
            let gx = args.needs[0].then(|| {
                let mut gx = vec![T::zero(); rows * n_in];
                matmul_into(rows, g4, n_in, &dz_all, false, wih, true, &mut gx, false);
                gx
            });
            let gwih = args.needs[1].then(|| {
                let mut gw = vec![T::zero(); n_in * g4];
                matmul_into(n_in, rows, g4, xv, true, &dz_all, false, &mut gw, false);
                gw
            });
            let gb = args.needs[3].then(|| {
                let mut gb = vec![T::zero(); g4];
                for row in dz_all.chunks(g4) {
                    gb.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
                }
                gb
            });
            vec![gx, gwih, args.needs[2].then_some(dwhh), gb]
        })
    }
}
