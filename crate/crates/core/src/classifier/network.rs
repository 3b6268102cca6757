//! Dense network with batch normalization, leaky ReLU and inverted dropout,
//! generic over the float type so the same code runs in f32 for training
//! and f64 for gradient checking.
//!
//! Layer stack:
//!
//! ```text
//! input → BN0 → Dense1(256) → BN1 → LeakyReLU → Dropout
//!       → Dense2(128) → BN2 → LeakyReLU → Dropout
//!       → Dense3(64) → Dense4(2) → (sigmoid, applied by the caller)
//! ```

use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const HIDDEN: [usize; 3] = [256, 128, 64];
pub const OUTPUTS: usize = 2;
pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the old value in the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.99;

fn cast<T: NdFloat>(v: f64) -> T {
    T::from(v).expect("float conversion")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    /// `[inputs, outputs]`.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: NdFloat> Dense<T> {
    /// Glorot-uniform weights, zero bias.
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((inputs, outputs), || cast(rng.random_range(-limit..limit)));
        Dense {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    fn forward(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.weight) + &self.bias
    }

    /// Returns `(grad, dx)`; `dx` is skipped when not needed.
    fn backward(&self, x: &Array2<T>, dy: &Array2<T>, need_dx: bool) -> (Dense<T>, Option<Array2<T>>) {
        let grad = Dense {
            weight: x.t().dot(dy),
            bias: dy.sum_axis(Axis(0)),
        };
        let dx = need_dx.then(|| dy.dot(&self.weight.t()));
        (grad, dx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

/// Per-feature batch mean and biased variance, accumulated in f64.
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub(crate) struct BnCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
    batch_stats: bool,
}

impl<T: NdFloat> BatchNorm<T> {
    fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(features),
            beta: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
        }
    }

    fn batch_stats(x: &Array2<T>) -> BatchStats {
        let (rows, cols) = x.dim();
        let mut mean = vec![0.0f64; cols];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v.to_f64().unwrap();
            }
        }
        let n = rows as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; cols];
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
                let d = v.to_f64().unwrap() - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        BatchStats { mean, var }
    }

    fn forward(&self, x: &Array2<T>, batch_stats: bool) -> (Array2<T>, BnCache<T>, Option<BatchStats>) {
        let (mean, inv_std, stats): (Array1<T>, Array1<T>, _) = if batch_stats {
            let stats = Self::batch_stats(x);
            let mean = stats.mean.iter().map(|&m| cast(m)).collect();
            let inv = stats.var.iter().map(|&v| cast(1.0 / (v + BN_EPSILON).sqrt())).collect();
            (mean, inv, Some(stats))
        } else {
            let inv = self
                .running_var
                .mapv(|v| cast(1.0 / (v.to_f64().unwrap() + BN_EPSILON).sqrt()));
            (self.running_mean.clone(), inv, None)
        };
        let xhat = (x - &mean) * &inv_std;
        let y = &xhat * &self.gamma + &self.beta;
        (
            y,
            BnCache {
                xhat,
                inv_std,
                batch_stats,
            },
            stats,
        )
    }

    fn backward(&self, cache: &BnCache<T>, dy: &Array2<T>, need_dx: bool) -> (BatchNorm<T>, Option<Array2<T>>) {
        let features = self.gamma.len();
        let dgamma = (dy * &cache.xhat).sum_axis(Axis(0));
        let dbeta = dy.sum_axis(Axis(0));
        let dx = need_dx.then(|| {
            let dxhat = dy * &self.gamma;
            if cache.batch_stats {
                let n: T = cast(dy.nrows() as f64);
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
                let mut dx = dxhat * n - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat);
                dx *= &(&cache.inv_std / n);
                dx
            } else {
                dxhat * &cache.inv_std
            }
        });
        let grad = BatchNorm {
            gamma: dgamma,
            beta: dbeta,
            running_mean: Array1::zeros(features),
            running_var: Array1::zeros(features),
        };
        (grad, dx)
    }

    /// `running ← momentum·running + (1 − momentum)·batch`.
    pub fn update_running(&mut self, stats: &BatchStats) {
        let keep = BN_MOMENTUM;
        Zip::from(&mut self.running_mean).and(&stats.mean).for_each(|r, &m| {
            *r = cast(keep * r.to_f64().unwrap() + (1.0 - keep) * m);
        });
        Zip::from(&mut self.running_var).and(&stats.var).for_each(|r, &v| {
            *r = cast(keep * r.to_f64().unwrap() + (1.0 - keep) * v);
        });
    }
}

/// Dropout state for one forward pass.
pub struct Dropout<'a> {
    pub p: f64,
    pub rng: &'a mut ChaCha8Rng,
}

/// Inverted-dropout mask: 0 with probability `p`, else `1 / (1 − p)`.
pub fn dropout_mask<T: NdFloat>(shape: (usize, usize), p: f64, rng: &mut ChaCha8Rng) -> Array2<T> {
    let scale: T = cast(1.0 / (1.0 - p));
    Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < p {
            T::zero()
        } else {
            scale
        }
    })
}

pub struct ForwardOptions<'a> {
    /// Normalize with batch statistics instead of running statistics.
    pub batch_stats: bool,
    pub dropout: Option<Dropout<'a>>,
    pub leaky_slope: f64,
}

pub(crate) struct Cache<T> {
    bn0: BnCache<T>,
    a0: Array2<T>,
    bn1: BnCache<T>,
    z1: Array2<T>,
    mask1: Option<Array2<T>>,
    a1: Array2<T>,
    bn2: BnCache<T>,
    z2: Array2<T>,
    mask2: Option<Array2<T>>,
    a2: Array2<T>,
    h3: Array2<T>,
    slope: T,
    pub(crate) stats: Option<[BatchStats; 3]>,
}

impl<T: NdFloat> Cache<T> {
    /// Sign pattern of both leaky-ReLU inputs, for kink detection.
    pub(crate) fn activation_pattern(&self) -> Vec<bool> {
        self.z1.iter().chain(self.z2.iter()).map(|v| *v > T::zero()).collect()
    }
}

fn leaky_relu<T: NdFloat>(z: &Array2<T>, slope: T) -> Array2<T> {
    z.mapv(|v| if v > T::zero() { v } else { v * slope })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub bn0: BatchNorm<T>,
    pub dense1: Dense<T>,
    pub bn1: BatchNorm<T>,
    pub dense2: Dense<T>,
    pub bn2: BatchNorm<T>,
    pub dense3: Dense<T>,
    pub dense4: Dense<T>,
}

/// Names of the trainable tensors in [`Network::params`] order.
pub const PARAM_NAMES: [&str; 14] = [
    "bn0.gamma",
    "bn0.beta",
    "dense1.weight",
    "dense1.bias",
    "bn1.gamma",
    "bn1.beta",
    "dense2.weight",
    "dense2.bias",
    "bn2.gamma",
    "bn2.beta",
    "dense3.weight",
    "dense3.bias",
    "dense4.weight",
    "dense4.bias",
];

impl<T: NdFloat> Network<T> {
    pub fn init(input_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let [h1, h2, h3] = HIDDEN;
        Network {
            bn0: BatchNorm::new(input_dim),
            dense1: Dense::init(input_dim, h1, rng),
            bn1: BatchNorm::new(h1),
            dense2: Dense::init(h1, h2, rng),
            bn2: BatchNorm::new(h2),
            dense3: Dense::init(h2, h3, rng),
            dense4: Dense::init(h3, OUTPUTS, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.bn0.gamma.len()
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> [usize; 5] {
        [
            self.input_dim(),
            self.dense1.bias.len(),
            self.dense2.bias.len(),
            self.dense3.bias.len(),
            self.dense4.bias.len(),
        ]
    }

    pub fn cast<U: NdFloat>(&self) -> Network<U> {
        let c1 = |a: &Array1<T>| a.mapv(|v| cast::<U>(v.to_f64().unwrap()));
        let c2 = |a: &Array2<T>| a.mapv(|v| cast::<U>(v.to_f64().unwrap()));
        let bn = |b: &BatchNorm<T>| BatchNorm {
            gamma: c1(&b.gamma),
            beta: c1(&b.beta),
            running_mean: c1(&b.running_mean),
            running_var: c1(&b.running_var),
        };
        let dense = |d: &Dense<T>| Dense {
            weight: c2(&d.weight),
            bias: c1(&d.bias),
        };
        Network {
            bn0: bn(&self.bn0),
            dense1: dense(&self.dense1),
            bn1: bn(&self.bn1),
            dense2: dense(&self.dense2),
            bn2: bn(&self.bn2),
            dense3: dense(&self.dense3),
            dense4: dense(&self.dense4),
        }
    }

    /// Returns the two output logits per row of `x`.
    pub(crate) fn forward(&self, x: ArrayView2<T>, opts: ForwardOptions<'_>) -> (Array2<T>, Cache<T>) {
        let ForwardOptions {
            batch_stats,
            mut dropout,
            leaky_slope,
        } = opts;
        let slope: T = cast(leaky_slope);
        let x = x.to_owned();

        let (a0, bn0, s0) = self.bn0.forward(&x, batch_stats);
        drop(x);
        let h1 = self.dense1.forward(&a0);
        let (z1, bn1, s1) = self.bn1.forward(&h1, batch_stats);
        drop(h1);
        let mut a1 = leaky_relu(&z1, slope);
        let mask1 = dropout.as_mut().map(|d| dropout_mask::<T>(a1.dim(), d.p, d.rng));
        if let Some(m) = &mask1 {
            a1 *= m;
        }

        let h2 = self.dense2.forward(&a1);
        let (z2, bn2, s2) = self.bn2.forward(&h2, batch_stats);
        let mut a2 = leaky_relu(&z2, slope);
        let mask2 = dropout.as_mut().map(|d| dropout_mask::<T>(a2.dim(), d.p, d.rng));
        if let Some(m) = &mask2 {
            a2 *= m;
        }

        let h3 = self.dense3.forward(&a2);
        let logits = self.dense4.forward(&h3);
        let stats = match (s0, s1, s2) {
            (Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
        (
            logits,
            Cache {
                bn0,
                a0,
                bn1,
                z1,
                mask1,
                a1,
                bn2,
                z2,
                mask2,
                a2,
                h3,
                slope,
                stats,
            },
        )
    }

    /// Parameter gradients given `∂loss/∂logits`. Running-statistic fields of
    /// the returned network are zero.
    pub(crate) fn backward(&self, cache: &Cache<T>, dlogits: &Array2<T>) -> Network<T> {
        let (g4, dh3) = self.dense4.backward(&cache.h3, dlogits, true);
        let (g3, da2) = self.dense3.backward(&cache.a2, &dh3.unwrap(), true);

        let act_grad = |dz: Array2<T>, z: &Array2<T>, mask: &Option<Array2<T>>| {
            let mut d = dz;
            if let Some(m) = mask {
                d *= m;
            }
            Zip::from(&mut d).and(z).for_each(|g, &zv| {
                if zv <= T::zero() {
                    *g *= cache.slope;
                }
            });
            d
        };

        let dz2 = act_grad(da2.unwrap(), &cache.z2, &cache.mask2);
        let (gbn2, dh2) = self.bn2.backward(&cache.bn2, &dz2, true);
        let (g2, da1) = self.dense2.backward(&cache.a1, &dh2.unwrap(), true);
        let dz1 = act_grad(da1.unwrap(), &cache.z1, &cache.mask1);
        let (gbn1, dh1) = self.bn1.backward(&cache.bn1, &dz1, true);
        let (g1, da0) = self.dense1.backward(&cache.a0, &dh1.unwrap(), true);
        let (gbn0, _) = self.bn0.backward(&cache.bn0, &da0.unwrap(), false);

        Network {
            bn0: gbn0,
            dense1: g1,
            bn1: gbn1,
            dense2: g2,
            bn2: gbn2,
            dense3: g3,
            dense4: g4,
        }
    }

    /// Trainable tensors as flat slices, in [`PARAM_NAMES`] order.
    pub fn params(&self) -> Vec<&[T]> {
        fn s1<T>(a: &Array1<T>) -> &[T] {
            a.as_slice().expect("standard layout")
        }
        fn s2<T>(a: &Array2<T>) -> &[T] {
            a.as_slice().expect("standard layout")
        }
        vec![
            s1(&self.bn0.gamma),
            s1(&self.bn0.beta),
            s2(&self.dense1.weight),
            s1(&self.dense1.bias),
            s1(&self.bn1.gamma),
            s1(&self.bn1.beta),
            s2(&self.dense2.weight),
            s1(&self.dense2.bias),
            s1(&self.bn2.gamma),
            s1(&self.bn2.beta),
            s2(&self.dense3.weight),
            s1(&self.dense3.bias),
            s2(&self.dense4.weight),
            s1(&self.dense4.bias),
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        fn m1<T>(a: &mut Array1<T>) -> &mut [T] {
            a.as_slice_mut().expect("standard layout")
        }
        fn m2<T>(a: &mut Array2<T>) -> &mut [T] {
            a.as_slice_mut().expect("standard layout")
        }
        vec![
            m1(&mut self.bn0.gamma),
            m1(&mut self.bn0.beta),
            m2(&mut self.dense1.weight),
            m1(&mut self.dense1.bias),
            m1(&mut self.bn1.gamma),
            m1(&mut self.bn1.beta),
            m2(&mut self.dense2.weight),
            m1(&mut self.dense2.bias),
            m1(&mut self.bn2.gamma),
            m1(&mut self.bn2.beta),
            m2(&mut self.dense3.weight),
            m1(&mut self.dense3.bias),
            m2(&mut self.dense4.weight),
            m1(&mut self.dense4.bias),
        ]
    }

    pub fn batch_norms_mut(&mut self) -> [&mut BatchNorm<T>; 3] {
        [&mut self.bn0, &mut self.bn1, &mut self.bn2]
    }

    pub fn batch_norms(&self) -> [&BatchNorm<T>; 3] {
        [&self.bn0, &self.bn1, &self.bn2]
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
            && self.batch_norms().iter().all(|bn| {
                bn.running_mean.iter().all(|v| v.is_finite())
                    && bn.running_var.iter().all(|v| v.is_finite() && *v >= T::zero())
            })
    }
}
