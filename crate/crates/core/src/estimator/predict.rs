use serde::{Deserialize, Serialize, Serializer};

use super::likelihood::map_observations;
use super::sample::{Mode, Sample};
use crate::density::{conditional_mean_jump, landing_law, MEAN_TAIL};
use crate::error::{LobError, Result};
use crate::model::ModelParams;

/// Which observations define the naive forecast `a+_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanBasis {
    #[default]
    InSample,
    FullSample,
}

/// Writes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_extended_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn deserialize_extended_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Str(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    /// `1 - model_mae / naive_mae`; `-inf` when the naive error is zero.
    #[serde(serialize_with = "serialize_extended_f64", deserialize_with = "deserialize_extended_f64")]
    pub p_m: f64,
    pub naive_mae: f64,
    pub model_mae: f64,
    pub n_out: usize,
    pub naive_mean: f64,
}

/// Prediction power from out-of-sample jumps, model forecasts and the
/// naive mean forecast.
pub fn p_m_from(out_jumps: &[f64], predictions: &[f64], naive_mean: f64) -> Result<PredictionReport> {
    if out_jumps.is_empty() || out_jumps.len() != predictions.len() {
        return Err(LobError::InsufficientData(format!(
            "{} out-of-sample jumps against {} predictions",
            out_jumps.len(),
            predictions.len()
        )));
    }
    let m = out_jumps.len() as f64;
    let model_mae = out_jumps.iter().zip(predictions).map(|(a, e)| (a - e).abs()).sum::<f64>() / m;
    let naive_mae = out_jumps.iter().map(|a| (a - naive_mean).abs()).sum::<f64>() / m;
    let p_m = if naive_mae == 0.0 { f64::NEG_INFINITY } else { 1.0 - model_mae / naive_mae };
    Ok(PredictionReport { p_m, naive_mae, model_mae, n_out: out_jumps.len(), naive_mean })
}

/// Out-of-sample prediction power of the fitted `params`: each jump
/// magnitude is forecast by its conditional mean given the history.
pub fn prediction_power(sample: &Sample, params: &ModelParams, mode: Mode, basis: MeanBasis) -> Result<PredictionReport> {
    if sample.n_out == 0 {
        return Err(LobError::InsufficientData("the out-of-sample segment is empty".into()));
    }
    let rows = map_observations(sample, params, mode, |post, view| {
        if !view.obs.out_of_sample {
            return None;
        }
        let s = match mode {
            Mode::Zi => 0,
            Mode::Gzi => view.obs.s,
        };
        Some((view.magnitude() as f64, conditional_mean_jump(post, s)))
    })?;
    let (out, pred): (Vec<f64>, Vec<f64>) = rows.into_iter().flatten().unzip();
    let mut basis_jumps = sample.jumps(false);
    if basis == MeanBasis::FullSample {
        basis_jumps.extend(sample.jumps(true));
    }
    let naive_mean = basis_jumps.iter().sum::<usize>() as f64 / basis_jumps.len().max(1) as f64;
    p_m_from(&out, &pred, naive_mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub dropped_in: usize,
    pub dropped_out: usize,
}

/// Drops the observations whose conditional `k`-th moment of the jump
/// magnitude under `params` exceeds `cap`.
pub fn moment_cap_filter(
    sample: &Sample,
    params: &ModelParams,
    mode: Mode,
    k: f64,
    cap: f64,
) -> Result<(Sample, FilterReport)> {
    if !(k > 2.0) {
        return Err(LobError::Domain(format!("moment order must exceed 2, got {k}")));
    }
    let rows = map_observations(sample, params, mode, |post, view| {
        let s = if mode == Mode::Gzi { view.obs.s } else { 0 };
        let moment = landing_law(post, s, MEAN_TAIL).moment(k);
        (moment <= cap, view.obs.out_of_sample)
    })?;
    let keep: Vec<bool> = rows.iter().map(|r| r.0).collect();
    let report = FilterReport {
        dropped_in: rows.iter().filter(|r| !r.0 && !r.1).count(),
        dropped_out: rows.iter().filter(|r| !r.0 && r.1).count(),
    };
    let mut out = sample.clone();
    out.retain_obs(&keep);
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_fixture() {
        let r = p_m_from(&[1.0, 3.0], &[1.5, 2.5], 2.0).unwrap();
        assert_eq!(r.p_m, 0.5);
        assert_eq!(r.model_mae, 0.5);
        assert_eq!(r.naive_mae, 1.0);
    }

    #[test]
    fn exact_forecasts_give_one() {
        let r = p_m_from(&[1.0, 4.0, 2.0], &[1.0, 4.0, 2.0], 2.0).unwrap();
        assert_eq!(r.p_m, 1.0);
    }

    #[test]
    fn unit_jumps_give_minus_infinity() {
        let r = p_m_from(&[1.0; 5], &[1.2; 5], 1.0).unwrap();
        assert_eq!(r.p_m, f64::NEG_INFINITY);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"p_m\":\"-inf\""), "{json}");
        let back: PredictionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.p_m, f64::NEG_INFINITY);
    }

    #[test]
    fn empty_out_of_sample_is_an_error() {
        assert!(p_m_from(&[], &[], 1.0).is_err());
    }
}
