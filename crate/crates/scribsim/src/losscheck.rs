//! Evaluates the loss kernels on tensors from disk and reports values and
//! gradient-check errors as JSON.

use std::path::PathBuf;

use serde_json::{json, Map, Value};

use scribsim_core::loss::{
    cam, grad_check, logit_gradient, lorm_forward, evaluate, EntropySign, LossInputs, LossKind, Projection, Reduction,
};
use scribsim_core::{ProbabilityMap, Tensor};

use crate::error::{Error, Result};
use crate::png_io::{read_distance_map, read_label_mask};
use crate::tensor_io::read_tensor;

#[derive(Debug, Clone, Default)]
pub struct LossCheckRequest {
    /// `K x H x W` logits; probabilities are their channel softmax.
    pub logits: Option<PathBuf>,
    pub scribble: Option<PathBuf>,
    pub pseudo: Option<PathBuf>,
    pub epsilon: f64,
    /// A `.dist.png` with its sidecar.
    pub dmap: Option<PathBuf>,
    pub sign: EntropySign,
    pub features: Option<PathBuf>,
    pub cam_weights: Option<PathBuf>,
    pub cam_class: usize,
    pub lorm_mask: Option<PathBuf>,
    pub proj_q: Option<PathBuf>,
    pub proj_k: Option<PathBuf>,
    pub delta: f64,
    pub reduction: Reduction,
}

fn differentiable(kind: LossKind, inputs: &LossInputs<'_>, logits: &Tensor<f64>) -> Result<Value> {
    let pred = ProbabilityMap::from_logits(logits)?;
    let value = evaluate(kind, inputs, &pred)?;
    let grad = logit_gradient(kind, inputs, logits)?;
    let err = grad_check(kind, inputs, logits, &grad)?;
    Ok(json!({ "value": value, "grad_check_max_rel_error": err }))
}

pub fn run_losscheck(req: &LossCheckRequest) -> Result<Value> {
    let mut out = Map::new();
    if let Some(path) = &req.logits {
        let logits: Tensor<f64> = read_tensor(path)?.cast();
        if let Some(p) = &req.scribble {
            let labels = read_label_mask(p)?;
            out.insert("partial_ce".into(), differentiable(LossKind::PartialCe, &LossInputs::labels(&labels), &logits)?);
        }
        if let Some(p) = &req.pseudo {
            let labels = read_label_mask(p)?;
            let inputs = LossInputs::smoothed(&labels, req.epsilon);
            let mut entry = differentiable(LossKind::SmoothedCe, &inputs, &logits)?;
            entry["epsilon"] = json!(req.epsilon);
            out.insert("smoothed_ce".into(), entry);
        }
        if let Some(p) = &req.dmap {
            let (map, sidecar) = read_distance_map(p)?;
            let mut entry = differentiable(LossKind::DpLoss, &LossInputs::distance(&map, req.sign), &logits)?;
            entry["kind"] = json!(sidecar.kind);
            entry["lambda"] = json!(sidecar.lambda);
            entry["sign"] = json!(match req.sign {
                EntropySign::AsPrinted => "printed",
                EntropySign::Negated => "negated",
            });
            out.insert("dp_loss".into(), entry);
        }
    }
    if let Some(fp) = &req.features {
        let features: Tensor<f64> = read_tensor(fp)?.cast();
        if let Some(wp) = &req.cam_weights {
            let weights: Tensor<f64> = read_tensor(wp)?.cast();
            let map = cam(&features, &weights, req.cam_class)?;
            out.insert(
                "cam".into(),
                json!({ "class": req.cam_class, "shape": map.shape(), "values": map.data() }),
            );
        }
        if let Some(mp) = &req.lorm_mask {
            let mask: Tensor<f64> = read_tensor(mp)?.cast();
            let q: Tensor<f64> = match &req.proj_q {
                Some(p) => read_tensor(p)?.cast(),
                None => return Err(Error::Config("lorm needs --proj-q".into())),
            };
            let k: Option<Tensor<f64>> = match &req.proj_k {
                Some(p) => Some(read_tensor(p)?.cast()),
                None => None,
            };
            let projection = match &k {
                Some(k) => Projection::Separate { query: &q, key: k },
                None => Projection::Shared(&q),
            };
            let res = lorm_forward(&features, &mask, projection, req.delta, req.reduction)?;
            out.insert(
                "lorm".into(),
                json!({
                    "loss": res.loss,
                    "shared_projection": k.is_none(),
                    "delta": req.delta,
                    "reduction": match req.reduction { Reduction::Mean => "mean", Reduction::Sum => "sum" },
                }),
            );
        }
    }
    if out.is_empty() {
        return Err(Error::Config("nothing to evaluate; pass --logits with labels or a distance map, or --features".into()));
    }
    Ok(Value::Object(out))
}
