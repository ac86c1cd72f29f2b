//! Momentum SGD with L2 weight decay added to the gradient.

use neurodecode_autodiff::{ParamStore, Real};

/// `g' = g + λθ`, `v ← μv + g'`, `θ ← θ − lr·v` on raw buffers.
pub fn sgd_update<T: Real>(theta: &mut [T], grad: &[T], velocity: &mut [T], lr: f64, momentum: f64, weight_decay: f64) {
    let (lr, mu, wd) = (T::from_f64_lossy(lr), T::from_f64_lossy(momentum), T::from_f64_lossy(weight_decay));
    for ((x, &g), v) in theta.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = mu * *v + g + wd * *x;
        *x = *x - lr * *v;
    }
}

/// Applies [`sgd_update`] to every parameter using its accumulated
/// gradient and momentum buffer. Returns `false` if any updated value is
/// not finite.
pub fn sgd_step<T: Real>(store: &mut ParamStore<T>, lr: f64, momentum: f64, weight_decay: f64) -> bool {
    let mut finite = true;
    for p in store.iter_mut() {
        sgd_update(p.value.data_mut(), &p.grad, &mut p.momentum, lr, momentum, weight_decay);
        finite &= p.value.data().iter().all(|v| v.is_finite());
    }
    finite
}
