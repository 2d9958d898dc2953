//! Built-in models and the name-keyed registry used by the command line.

pub mod diff_drive;
pub mod gyroscope;
pub mod slider_crank;

pub use diff_drive::{diff_drive, diff_drive_reduced, DiffDriveParams};
pub use gyroscope::{gyroscope, GyroscopeParams, GIMBAL_MARGIN};
pub use slider_crank::{
    closed_configuration, consistent_state, crank, loop_closure_error, rod_slider, slider_crank,
    SliderCrankParams,
};

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::PhError;
use crate::interconnect::CoupledSystem;
use crate::system::PhSystem;

/// Names accepted by [`build`].
pub const MODEL_NAMES: [&str; 6] = [
    "diff-drive",
    "diff-drive-reduced",
    "gyroscope",
    "crank",
    "rod-slider",
    "slider-crank",
];

/// Negative fixture, also accepted by [`build`] but not part of the regular
/// registry: a unit cart whose single port direction is its own position, so
/// any coupling through that port loses rank at the origin.
pub const RANK_DROP_FIXTURE: &str = "rank-drop-fixture";

/// A registered model: the system, its documented sampling box
/// (positions then momenta), the resolved parameters, and the coupled
/// representation when the model is an interconnection.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub name: String,
    pub system: PhSystem,
    pub sample_bounds: Vec<(f64, f64)>,
    pub params: BTreeMap<String, f64>,
    pub coupled: Option<CoupledSystem>,
}

fn resolve_params(
    name: &str,
    defaults: &[(&str, f64)],
    overrides: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, PhError> {
    let mut out: BTreeMap<String, f64> =
        defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !out.contains_key(k) {
            let valid: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
            return Err(PhError::Param(format!(
                "unknown parameter '{k}' for model '{name}' (valid: {})",
                valid.join(", ")
            )));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

const PI: f64 = std::f64::consts::PI;

/// Build a registered model by name, applying parameter overrides.
pub fn build(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ModelEntry, PhError> {
    match name {
        "diff-drive" | "diff-drive-reduced" => {
            let p = resolve_params(
                name,
                &[("m", 1.0), ("ell", 0.1), ("i_s", 0.05), ("b", 0.5)],
                overrides,
            )?;
            let params = DiffDriveParams {
                m: p["m"],
                ell: p["ell"],
                i_s: p["i_s"],
                b: p["b"],
            };
            let (system, gamma_dim) = if name == "diff-drive" {
                (diff_drive(&params)?, 3)
            } else {
                (diff_drive_reduced(&params)?, 2)
            };
            let mut bounds = vec![(-2.0, 2.0), (-2.0, 2.0), (-PI, PI)];
            bounds.extend(vec![(-2.0, 2.0); gamma_dim]);
            Ok(ModelEntry {
                name: name.into(),
                system,
                sample_bounds: bounds,
                params: p,
                coupled: None,
            })
        }
        "gyroscope" => {
            let p = resolve_params(name, &[("m", 1.0), ("r", 0.1), ("w", 0.02)], overrides)?;
            let system = gyroscope(&GyroscopeParams {
                m: p["m"],
                r: p["r"],
                w: p["w"],
            })?;
            let bounds = vec![
                (-PI, PI),
                (-1.2, 1.2),
                (-PI, PI),
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, 1.0),
            ];
            Ok(ModelEntry {
                name: name.into(),
                system,
                sample_bounds: bounds,
                params: p,
                coupled: None,
            })
        }
        "crank" => {
            let p = resolve_params(name, &[("l1", 0.2), ("i1_a", 0.01)], overrides)?;
            let sc = SliderCrankParams {
                l1: p["l1"],
                i1_a: p["i1_a"],
                ..SliderCrankParams::default()
            };
            let system = crank(&sc)?;
            Ok(ModelEntry {
                name: name.into(),
                system,
                sample_bounds: vec![(-PI, PI), (-1.0, 1.0)],
                params: p,
                coupled: None,
            })
        }
        "rod-slider" => {
            let p = resolve_params(
                name,
                &[("l2", 0.5), ("m2", 1.0), ("r2", 0.25), ("i2_b", 0.1)],
                overrides,
            )?;
            let sc = SliderCrankParams {
                l2: p["l2"],
                m2: p["m2"],
                r2: p["r2"],
                i2_b: p["i2_b"],
                ..SliderCrankParams::default()
            };
            let system = rod_slider(&sc)?;
            let bounds = vec![
                (-1.0, 1.0),
                (-0.5, 0.5),
                (-PI, PI),
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, 1.0),
            ];
            Ok(ModelEntry {
                name: name.into(),
                system,
                sample_bounds: bounds,
                params: p,
                coupled: None,
            })
        }
        "slider-crank" => {
            let p = resolve_params(
                name,
                &[
                    ("l1", 0.2),
                    ("i1_a", 0.01),
                    ("l2", 0.5),
                    ("m2", 1.0),
                    ("r2", 0.25),
                    ("i2_b", 0.1),
                ],
                overrides,
            )?;
            let sc = SliderCrankParams {
                l1: p["l1"],
                i1_a: p["i1_a"],
                l2: p["l2"],
                m2: p["m2"],
                r2: p["r2"],
                i2_b: p["i2_b"],
            };
            let coupled = slider_crank(&sc)?;
            let bounds = vec![
                (-PI, PI),
                (-1.0, 1.0),
                (-0.5, 0.5),
                (-1.2, 1.2),
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, 1.0),
            ];
            Ok(ModelEntry {
                name: name.into(),
                system: coupled.system.clone(),
                sample_bounds: bounds,
                params: p,
                coupled: Some(coupled),
            })
        }
        RANK_DROP_FIXTURE => {
            let p = resolve_params(name, &[("m", 1.0)], overrides)?;
            let system = PhSystem::cartesian(1)
                .mass(nalgebra::DMatrix::from_element(1, 1, p["m"]))
                .ports(&["position_scaled"], |z: &DVector<f64>| {
                    nalgebra::DMatrix::from_element(1, 1, z[0])
                })
                .build()?;
            Ok(ModelEntry {
                name: name.into(),
                system,
                sample_bounds: vec![(-1.0, 1.0), (-1.0, 1.0)],
                params: p,
                coupled: None,
            })
        }
        other => Err(PhError::Param(format!(
            "unknown model '{other}' (registered: {})",
            MODEL_NAMES.join(", ")
        ))),
    }
}

impl ModelEntry {
    fn slider_crank_params(&self) -> SliderCrankParams {
        SliderCrankParams {
            l1: self.params["l1"],
            i1_a: self.params["i1_a"],
            l2: self.params["l2"],
            m2: self.params["m2"],
            r2: self.params["r2"],
            i2_b: self.params["i2_b"],
        }
    }

    /// Initial-condition guess from key/value settings. Generic keys `zeta`
    /// and `omega` set the raw coordinate vectors; the slider-crank also
    /// accepts `phi1` and `omega1`, building the loop-closed configuration.
    pub fn resolve_init(
        &self,
        kv: &BTreeMap<String, Vec<f64>>,
    ) -> Result<(DVector<f64>, DVector<f64>), PhError> {
        let sys = &self.system;
        let mut zeta = DVector::zeros(sys.n_pot);
        let mut omega = DVector::zeros(sys.n_kin);

        if self.name == "slider-crank" {
            let p = self.slider_crank_params();
            let phi1 = kv.get("phi1").map(|v| v[0]).unwrap_or(0.3);
            let omega1 = kv.get("omega1").map(|v| v[0]).unwrap_or(0.0);
            let coupled = self.coupled.as_ref().expect("coupled representation");
            let state = consistent_state(coupled, &p, phi1, omega1)?;
            zeta = state.zeta;
            omega = state.omega;
        }

        for (key, values) in kv {
            match key.as_str() {
                "zeta" => {
                    if values.len() != sys.n_pot {
                        return Err(PhError::Param(format!(
                            "zeta needs {} values, got {}",
                            sys.n_pot,
                            values.len()
                        )));
                    }
                    zeta = DVector::from_row_slice(values);
                }
                "omega" => {
                    if values.len() != sys.n_kin {
                        return Err(PhError::Param(format!(
                            "omega needs {} values, got {}",
                            sys.n_kin,
                            values.len()
                        )));
                    }
                    omega = DVector::from_row_slice(values);
                }
                "phi1" | "omega1" if self.name == "slider-crank" => {}
                other => {
                    return Err(PhError::Param(format!(
                        "unknown initial-condition key '{other}' for model '{}'",
                        self.name
                    )));
                }
            }
        }
        Ok((zeta, omega))
    }
}
