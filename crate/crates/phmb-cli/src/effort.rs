//! External-effort schedules: constant vectors, sinusoids, and
//! piecewise-constant tables, parseable from a flag string or the config
//! file. Arbitrary effort functions are a library feature, not a CLI one.

use nalgebra::DVector;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EffortSpec {
    #[default]
    Zero,
    Constant {
        values: Vec<f64>,
    },
    /// `values[i](t) = amp[i] * sin(2 pi freq[i] t + phase[i])`, freq in Hz.
    Sinusoid {
        amp: Vec<f64>,
        freq: Vec<f64>,
        #[serde(default)]
        phase: Vec<f64>,
    },
    /// Piecewise constant: each row is `[t, v_0, .., v_{m-1}]`; the row with
    /// the largest `t <= t_query` applies, zero before the first row.
    Table {
        rows: Vec<Vec<f64>>,
    },
}

fn parse_csv_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number '{x}': {e}"))
        })
        .collect()
}

impl EffortSpec {
    /// Parse the `--effort` flag syntax:
    /// `zero` | `const:v1,v2` | `sin:amp=..;freq=..[;phase=..]` |
    /// `table:t,v..;t,v..`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "zero" {
            return Ok(EffortSpec::Zero);
        }
        if let Some(rest) = s.strip_prefix("const:") {
            return Ok(EffortSpec::Constant {
                values: parse_csv_floats(rest)?,
            });
        }
        if let Some(rest) = s.strip_prefix("sin:") {
            let (mut amp, mut freq, mut phase) = (None, None, None);
            for part in rest.split(';') {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| format!("expected key=values in '{part}'"))?;
                let values = parse_csv_floats(value)?;
                match key.trim() {
                    "amp" => amp = Some(values),
                    "freq" => freq = Some(values),
                    "phase" => phase = Some(values),
                    other => return Err(format!("unknown sinusoid key '{other}'")),
                }
            }
            let amp = amp.ok_or("sinusoid needs amp=..")?;
            let freq = freq.ok_or("sinusoid needs freq=..")?;
            return Ok(EffortSpec::Sinusoid {
                amp,
                freq,
                phase: phase.unwrap_or_default(),
            });
        }
        if let Some(rest) = s.strip_prefix("table:") {
            let rows = rest
                .split(';')
                .map(parse_csv_floats)
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(EffortSpec::Table { rows });
        }
        Err(format!(
            "unknown effort spec '{s}' (zero | const:.. | sin:.. | table:..)"
        ))
    }

    /// Validate against the port count and build the evaluation closure.
    pub fn compile(&self, m_ports: usize) -> Result<Box<dyn Fn(f64) -> DVector<f64>>, String> {
        match self {
            EffortSpec::Zero => Ok(Box::new(move |_| DVector::zeros(m_ports))),
            EffortSpec::Constant { values } => {
                if values.len() != m_ports {
                    return Err(format!(
                        "effort needs {m_ports} channels, got {}",
                        values.len()
                    ));
                }
                let v = DVector::from_row_slice(values);
                Ok(Box::new(move |_| v.clone()))
            }
            EffortSpec::Sinusoid { amp, freq, phase } => {
                if amp.len() != m_ports || freq.len() != m_ports {
                    return Err(format!("sinusoid amp/freq need {m_ports} channels"));
                }
                if !phase.is_empty() && phase.len() != m_ports {
                    return Err(format!("sinusoid phase needs {m_ports} channels"));
                }
                let amp = amp.clone();
                let freq = freq.clone();
                let phase = if phase.is_empty() {
                    vec![0.0; m_ports]
                } else {
                    phase.clone()
                };
                Ok(Box::new(move |t| {
                    DVector::from_fn(m_ports, |i, _| {
                        amp[i] * (2.0 * std::f64::consts::PI * freq[i] * t + phase[i]).sin()
                    })
                }))
            }
            EffortSpec::Table { rows } => {
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != m_ports + 1 {
                        return Err(format!(
                            "table row {i} needs 1 + {m_ports} entries, got {}",
                            row.len()
                        ));
                    }
                    if i > 0 && rows[i - 1][0] >= row[0] {
                        return Err("table times must be strictly increasing".into());
                    }
                }
                let rows = rows.clone();
                Ok(Box::new(move |t| {
                    let mut current = DVector::zeros(m_ports);
                    for row in &rows {
                        if row[0] <= t {
                            current = DVector::from_row_slice(&row[1..]);
                        } else {
                            break;
                        }
                    }
                    current
                }))
            }
        }
    }
}
