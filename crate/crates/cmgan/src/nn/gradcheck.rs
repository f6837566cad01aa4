use super::store::{GradStore, ParamId, ParamStore};

/// Outcome of a finite-difference sweep over every parameter entry.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub entries_checked: usize,
    /// (param index, component description) of the worst entry, if any.
    pub worst: Option<(usize, String)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.entries_checked == 0 || self.max_rel_err <= tolerance
    }
}

/// Relative error with an absolute floor: entries whose gradients are below
/// the floor are compared absolutely (to floor * tolerance). Central
/// differences carry ~1e-10 of f64 round-off at the step sizes used here, so
/// a smaller floor would flag pure noise on near-zero gradients.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-4);
    (analytic - numeric).abs() / denom
}

/// Compares accumulated analytic gradients against central finite differences
/// of `loss_fn` over every learnable scalar (weights, biases, bn gamma/beta).
///
/// `grads` must hold the analytic gradient of `loss_fn` at the current point.
/// `loss_fn` must be deterministic in the parameters; batch-norm running
/// statistics are not perturbed (they do not influence train-mode losses).
pub fn gradient_check<F>(
    store: &mut ParamStore,
    grads: &GradStore,
    loss_fn: F,
    step: f64,
) -> GradCheckReport
where
    F: FnMut(&mut ParamStore) -> f64,
{
    let ids: Vec<_> = store.ids().collect();
    gradient_check_ids(store, grads, &ids, loss_fn, step)
}

/// As [`gradient_check`], restricted to the given parameter entries. Use this
/// when `grads` only holds derivatives with respect to a subset (for example
/// the discriminator side, where the generator is a frozen input).
pub fn gradient_check_ids<F>(
    store: &mut ParamStore,
    grads: &GradStore,
    ids: &[ParamId],
    mut loss_fn: F,
    step: f64,
) -> GradCheckReport
where
    F: FnMut(&mut ParamStore) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        entries_checked: 0,
        worst: None,
    };

    for &id in ids {
        let g = grads.get(id).clone();

        let weight_len = store.get(id).weight.len();
        for k in 0..weight_len {
            let analytic = g.weight.as_slice().unwrap()[k];
            let numeric = central_diff(store, &mut loss_fn, step, |s| {
                &mut s.get_mut(id).weight.as_slice_mut().unwrap()[k]
            });
            record(&mut report, analytic, numeric, id.index(), || {
                format!("weight[{k}]")
            });
        }
        let bias_len = store.get(id).bias.len();
        for k in 0..bias_len {
            let analytic = g.bias[k];
            let numeric = central_diff(store, &mut loss_fn, step, |s| &mut s.get_mut(id).bias[k]);
            record(&mut report, analytic, numeric, id.index(), || {
                format!("bias[{k}]")
            });
        }
        if store.get(id).batch_norm.is_some() {
            let dim = store.get(id).batch_norm.as_ref().unwrap().gamma.len();
            for k in 0..dim {
                let analytic = g.bn_gamma.as_ref().unwrap()[k];
                let numeric = central_diff(store, &mut loss_fn, step, |s| {
                    &mut s.get_mut(id).batch_norm.as_mut().unwrap().gamma[k]
                });
                record(&mut report, analytic, numeric, id.index(), || {
                    format!("bn_gamma[{k}]")
                });
                let analytic = g.bn_beta.as_ref().unwrap()[k];
                let numeric = central_diff(store, &mut loss_fn, step, |s| {
                    &mut s.get_mut(id).batch_norm.as_mut().unwrap().beta[k]
                });
                record(&mut report, analytic, numeric, id.index(), || {
                    format!("bn_beta[{k}]")
                });
            }
        }
    }
    report
}

fn central_diff<F, A>(store: &mut ParamStore, loss_fn: &mut F, step: f64, access: A) -> f64
where
    F: FnMut(&mut ParamStore) -> f64,
    A: Fn(&mut ParamStore) -> &mut f64,
{
    let original = *access(store);
    *access(store) = original + step;
    let plus = loss_fn(store);
    *access(store) = original - step;
    let minus = loss_fn(store);
    *access(store) = original;
    (plus - minus) / (2.0 * step)
}

fn record<D: FnOnce() -> String>(
    report: &mut GradCheckReport,
    analytic: f64,
    numeric: f64,
    param_index: usize,
    describe: D,
) {
    let err = rel_err(analytic, numeric);
    report.entries_checked += 1;
    if err > report.max_rel_err {
        report.max_rel_err = err;
        report.worst = Some((param_index, describe()));
    }
}
