//! Training objective and its hand-derived gradients.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{GduError, Result};
use crate::layer::{GatingMode, GatingWeights, GduLayer, LearningMachine};
use crate::regularization::{
    ols_residual, omega_l1, omega_orth, omega_orth_grad, omega_parts, OmegaParts, RegConfig,
};
use crate::rkhs::clamp_sq_norm;
use crate::scalar::Scalar;
use crate::training::data::Batch;
use crate::training::fe::DenseGrad;
use crate::training::loss::{loss_ce, softmax};
use crate::training::model::{Head, Model};
use crate::training::train::TrainMode;

/// Objective value and its components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue<T> {
    /// `loss + weighted_omega`.
    pub total: T,
    /// Mean cross-entropy.
    pub loss: T,
    /// Unweighted regularizer values (zero for heads without a gated layer).
    pub omega: OmegaParts<T>,
    pub weighted_omega: T,
}

/// Gradient of the objective for every trainable block.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    /// `None` when the feature extractor is frozen.
    pub fe: Option<Vec<DenseGrad<T>>>,
    pub bases: Vec<Array2<T>>,
    pub machines: Vec<DenseGrad<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Flat blocks in the order and naming of [`Model::param_slots`].
    pub fn blocks(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (k, g) in self.fe.iter().flatten().enumerate() {
            out.push((
                format!("fe.{k}.weights"),
                g.weights.as_slice().expect("standard layout"),
            ));
            out.push((
                format!("fe.{k}.bias"),
                g.bias.as_slice().expect("contiguous"),
            ));
        }
        for (j, g) in self.bases.iter().enumerate() {
            out.push((format!("basis.{j}"), g.as_slice().expect("standard layout")));
        }
        for (j, g) in self.machines.iter().enumerate() {
            out.push((
                format!("machine.{j}.weights"),
                g.weights.as_slice().expect("standard layout"),
            ));
            out.push((
                format!("machine.{j}.bias"),
                g.bias.as_slice().expect("contiguous"),
            ));
        }
        out
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (name, values) in self.blocks() {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(GduError::NonFiniteGradient { block: name });
            }
        }
        Ok(())
    }
}

fn check_batch<T: Scalar>(batch: &Batch<'_, T>, model: &Model<T>) -> Result<()> {
    if batch.is_empty() {
        return Err(GduError::Empty("objective batch"));
    }
    if batch.inputs.nrows() != batch.labels.len() {
        return Err(GduError::DimensionMismatch {
            left: batch.inputs.nrows(),
            right: batch.labels.len(),
        });
    }
    if batch.inputs.ncols() != model.fe.input_dim() {
        return Err(GduError::DimensionMismatch {
            left: batch.inputs.ncols(),
            right: model.fe.input_dim(),
        });
    }
    Ok(())
}

/// `(1/b) sum_i CE(g(h(x_i)), y_i) + Omega_D`.
pub fn objective<T: Scalar>(
    batch: Batch<'_, T>,
    model: &Model<T>,
    reg: &RegConfig<T>,
) -> Result<ObjectiveValue<T>> {
    check_batch(&batch, model)?;
    reg.validate()?;
    let feats = model.features(batch.inputs)?;
    let logits = model.head_logits(feats.view())?;
    let mut loss = T::zero();
    for (row, &y) in logits.rows().into_iter().zip(batch.labels) {
        loss += loss_ce(row, y)?;
    }
    loss /= T::from_usize_lossy(batch.len());
    let (omega, weighted_omega) = match &model.head {
        Head::Gdu(layer) => {
            let beta = layer.gate_rows(feats.view())?;
            let parts = omega_parts(feats.view(), &beta, layer, reg.orth_variant)?;
            (parts, weigh(&parts, reg, layer.mode()))
        }
        _ => (OmegaParts::default(), T::zero()),
    };
    Ok(ObjectiveValue {
        total: loss + weighted_omega,
        loss,
        omega,
        weighted_omega,
    })
}

fn weigh<T: Scalar>(parts: &OmegaParts<T>, reg: &RegConfig<T>, mode: GatingMode) -> T {
    let (w_ols, w_l1, w_orth) = reg.weights_for(mode);
    w_ols * parts.ols + w_l1 * parts.l1 + w_orth * parts.orth
}

/// Subgradient of `|v|` with `sign(0) = 0`.
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Output of a machine plus the backward step for a given output gradient.
struct MachineStep<'a, T> {
    machine: &'a LearningMachine<T>,
    out: Array1<T>,
}

impl<'a, T: Scalar> MachineStep<'a, T> {
    fn new(machine: &'a LearningMachine<T>, x: ArrayView1<'_, T>) -> Self {
        Self {
            machine,
            out: machine.apply(x),
        }
    }

    /// Accumulates `scale * d_out` into the machine gradient and the input gradient.
    fn backward(
        &self,
        x: ArrayView1<'_, T>,
        d_out: &[T],
        scale: T,
        grad: &mut DenseGrad<T>,
        dx: &mut [T],
    ) {
        let dz: Vec<T> = d_out
            .iter()
            .zip(self.out.iter())
            .map(|(&g, &o)| scale * g * self.machine.activation.derivative_from_output(o))
            .collect();
        for (c, &d) in dz.iter().enumerate() {
            grad.bias[c] += d;
        }
        for (r, &xv) in x.iter().enumerate() {
            let wrow = self.machine.weights.row(r);
            let mut acc = T::zero();
            for (c, &d) in dz.iter().enumerate() {
                grad.weights[[r, c]] += xv * d;
                acc += wrow[c] * d;
            }
            dx[r] += acc;
        }
    }
}

/// `(softmax(logits) - onehot(label)) / b`.
fn logit_grad<T: Scalar>(logits: ArrayView1<'_, T>, label: usize, inv_b: T) -> Vec<T> {
    let mut p = softmax(logits);
    p[label] -= T::one();
    p.iter_mut().for_each(|v| *v *= inv_b);
    p
}

struct HeadGrad<T> {
    value: ObjectiveValue<T>,
    bases: Vec<Array2<T>>,
    machines: Vec<DenseGrad<T>>,
    d_feats: Array2<T>,
}

fn baseline_backward<T: Scalar>(
    feats: ArrayView2<'_, T>,
    labels: &[usize],
    machines: &[LearningMachine<T>],
) -> Result<HeadGrad<T>> {
    let (b, e) = feats.dim();
    let inv_b = T::one() / T::from_usize_lossy(b);
    let scale = T::one() / T::from_usize_lossy(machines.len());
    let mut grads: Vec<DenseGrad<T>> = machines
        .iter()
        .map(|f| DenseGrad::zeros(f.input_dim(), f.output_dim()))
        .collect();
    let mut d_feats = Array2::zeros((b, e));
    let mut loss = T::zero();
    for (i, x) in feats.rows().into_iter().enumerate() {
        let steps: Vec<MachineStep<'_, T>> =
            machines.iter().map(|f| MachineStep::new(f, x)).collect();
        let mut y = Array1::zeros(machines[0].output_dim());
        for s in &steps {
            y += &s.out;
        }
        y *= scale;
        loss += loss_ce(y.view(), labels[i])?;
        let gy = logit_grad(y.view(), labels[i], inv_b);
        let mut dx = vec![T::zero(); e];
        for (s, g) in steps.iter().zip(grads.iter_mut()) {
            s.backward(x, &gy, scale, g, &mut dx);
        }
        d_feats.row_mut(i).assign(&Array1::from(dx));
    }
    loss *= inv_b;
    Ok(HeadGrad {
        value: ObjectiveValue {
            total: loss,
            loss,
            omega: OmegaParts::default(),
            weighted_omega: T::zero(),
        },
        bases: Vec::new(),
        machines: grads,
        d_feats,
    })
}

fn gdu_backward<T: Scalar>(
    feats: ArrayView2<'_, T>,
    labels: &[usize],
    layer: &GduLayer<T>,
    reg: &RegConfig<T>,
) -> Result<HeadGrad<T>> {
    let (b, e) = feats.dim();
    let (m, n) = (layer.num_bases(), layer.basis_size());
    let mode = layer.mode();
    let kappa = layer.kappa();
    let two = T::lit(2.0);
    let two_gamma = two * layer.kernel().gamma();
    let inv_b = T::one() / T::from_usize_lossy(b);
    let inv_n = T::one() / T::from_usize_lossy(n);
    let (w_ols, w_l1, w_orth) = reg.weights_for(mode);

    let g = layer.gram_bases();
    let s: Vec<T> = (0..m).map(|j| g[[j, j]]).collect();
    let bases: Vec<ArrayView2<'_, T>> = layer.bases().iter().map(|v| v.vectors()).collect();

    let mut d_bases: Vec<Array2<T>> = (0..m).map(|_| Array2::zeros((n, e))).collect();
    let mut d_machines: Vec<DenseGrad<T>> = layer
        .machines()
        .iter()
        .map(|f| DenseGrad::zeros(f.input_dim(), f.output_dim()))
        .collect();
    let mut d_g = Array2::<T>::zeros((m, m));
    let mut d_feats = Array2::zeros((b, e));
    let mut beta_rows = Array2::zeros((b, m));
    let (mut loss, mut ols) = (T::zero(), T::zero());

    for (i, x) in feats.rows().into_iter().enumerate() {
        // forward
        let kvals: Vec<Vec<T>> = bases
            .iter()
            .map(|v| {
                v.rows()
                    .into_iter()
                    .map(|vn| {
                        let d2 = x
                            .iter()
                            .zip(vn.iter())
                            .map(|(&p, &q)| (p - q) * (p - q))
                            .sum::<T>();
                        (-layer.kernel().gamma() * d2).exp()
                    })
                    .collect()
            })
            .collect();
        let a: Vec<T> = kvals
            .iter()
            .map(|kj| kj.iter().copied().sum::<T>() * inv_n)
            .collect();
        let beta = layer.gate_from_inner(&a, T::one(), &s);
        beta_rows.row_mut(i).assign(&Array1::from(beta.clone()));
        let steps: Vec<MachineStep<'_, T>> = layer
            .machines()
            .iter()
            .map(|f| MachineStep::new(f, x))
            .collect();
        let mut y = Array1::zeros(layer.output_dim());
        for (st, &bj) in steps.iter().zip(&beta) {
            y.scaled_add(bj, &st.out);
        }
        loss += loss_ce(y.view(), labels[i])?;
        let residual = ols_residual(&beta, &a, &g);
        ols += clamp_sq_norm(residual)?;

        // machines
        let gy = logit_grad(y.view(), labels[i], inv_b);
        let mut dx = vec![T::zero(); e];
        let mut d_beta: Vec<T> = steps
            .iter()
            .map(|st| st.out.iter().zip(&gy).map(|(&o, &gv)| o * gv).sum())
            .collect();
        for ((st, grad), &bj) in steps.iter().zip(d_machines.iter_mut()).zip(&beta) {
            st.backward(x, &gy, bj, grad, &mut dx);
        }

        // regularizers on beta, a and K
        let mut d_a = vec![T::zero(); m];
        if w_ols != T::zero() {
            let c = w_ols * inv_b;
            for j in 0..m {
                let gb: T = (0..m).map(|l| g[[j, l]] * beta[l]).sum();
                d_beta[j] += c * (two * gb - two * a[j]);
                d_a[j] -= c * two * beta[j];
                for l in 0..m {
                    d_g[[j, l]] += c * beta[j] * beta[l];
                }
            }
        }
        if w_l1 != T::zero() {
            for j in 0..m {
                d_beta[j] += w_l1 * inv_b * sign(beta[j]);
            }
        }

        // gate
        let mut d_s = vec![T::zero(); m];
        match mode {
            GatingMode::Cs | GatingMode::Mmd => {
                let dot: T = beta.iter().zip(&d_beta).map(|(&p, &q)| p * q).sum();
                for j in 0..m {
                    let d_h = kappa * beta[j] * (d_beta[j] - dot);
                    if mode == GatingMode::Cs {
                        let rs = s[j].sqrt();
                        d_a[j] += d_h / rs;
                        d_s[j] -= T::lit(0.5) * d_h * a[j] / (s[j] * rs);
                    } else {
                        d_a[j] += two * d_h;
                        d_s[j] -= d_h;
                    }
                }
            }
            GatingMode::Projection => {
                for j in 0..m {
                    d_a[j] += d_beta[j] / s[j];
                    d_s[j] -= d_beta[j] * a[j] / (s[j] * s[j]);
                }
            }
        }
        for j in 0..m {
            d_g[[j, j]] += d_s[j];
        }

        // a_j = (1/N) sum_n k(x, v_jn)
        for j in 0..m {
            for (nn, vn) in bases[j].rows().into_iter().enumerate() {
                let coef = d_a[j] * inv_n * kvals[j][nn] * two_gamma;
                let mut dv = d_bases[j].row_mut(nn);
                for r in 0..e {
                    let diff = vn[r] - x[r];
                    dx[r] += coef * diff;
                    dv[r] -= coef * diff;
                }
            }
        }
        d_feats.row_mut(i).assign(&Array1::from(dx));
    }

    let orth = omega_orth(g.view(), reg.orth_variant)?;
    if w_orth != T::zero() {
        d_g.scaled_add(w_orth, &omega_orth_grad(g.view(), reg.orth_variant));
    }

    // K_jl = (1/N^2) sum_{n,m} k(v_jn, v_lm)
    let inv_nn = inv_n * inv_n;
    for j in 0..m {
        for l in 0..m {
            let dg = d_g[[j, l]];
            if dg == T::zero() {
                continue;
            }
            for nj in 0..n {
                for nl in 0..n {
                    let (p, q) = (bases[j].row(nj), bases[l].row(nl));
                    let d2 = p
                        .iter()
                        .zip(q.iter())
                        .map(|(&u, &v)| (u - v) * (u - v))
                        .sum::<T>();
                    let coef = dg * inv_nn * layer.kernel().eval_sq_dist(d2) * two_gamma;
                    for r in 0..e {
                        let diff = q[r] - p[r];
                        d_bases[j][[nj, r]] += coef * diff;
                        d_bases[l][[nl, r]] -= coef * diff;
                    }
                }
            }
        }
    }

    loss *= inv_b;
    let omega = OmegaParts {
        ols: ols * inv_b,
        orth,
        l1: omega_l1(&GatingWeights::new(beta_rows)),
    };
    let weighted_omega = weigh(&omega, reg, mode);
    Ok(HeadGrad {
        value: ObjectiveValue {
            total: loss + weighted_omega,
            loss,
            omega,
            weighted_omega,
        },
        bases: d_bases,
        machines: d_machines,
        d_feats,
    })
}

/// Objective value and gradient without finiteness checks.
pub(crate) fn evaluate<T: Scalar>(
    batch: Batch<'_, T>,
    model: &Model<T>,
    reg: &RegConfig<T>,
    mode: TrainMode,
) -> Result<(ObjectiveValue<T>, Gradients<T>)> {
    check_batch(&batch, model)?;
    reg.validate()?;
    let acts = model.fe.forward_cached(batch.inputs)?;
    let feats = acts.last().expect("input activation present").view();
    let head = match &model.head {
        Head::Gdu(layer) => gdu_backward(feats, batch.labels, layer, reg)?,
        Head::Single(f) => baseline_backward(feats, batch.labels, std::slice::from_ref(f))?,
        Head::Ensemble(fs) => baseline_backward(feats, batch.labels, fs)?,
    };
    let fe = match mode {
        TrainMode::Ft => None,
        TrainMode::E2e => Some(model.fe.backward(&acts, head.d_feats)),
    };
    let grads = Gradients {
        fe,
        bases: head.bases,
        machines: head.machines,
    };
    Ok((head.value, grads))
}

/// Objective value and gradient. In [`TrainMode::Ft`] the feature extractor is
/// frozen and its gradient block is `None`.
pub fn gradients<T: Scalar>(
    batch: Batch<'_, T>,
    model: &Model<T>,
    reg: &RegConfig<T>,
    mode: TrainMode,
) -> Result<(ObjectiveValue<T>, Gradients<T>)> {
    let (value, grads) = evaluate(batch, model, reg, mode)?;
    if !value.total.is_finite() {
        return Err(GduError::NonFiniteGradient {
            block: "objective".into(),
        });
    }
    grads.check_finite()?;
    Ok((value, grads))
}
