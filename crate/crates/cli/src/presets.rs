//! Named parameter sets. Each one fixes a complete run so that the same
//! table can be regenerated with a single flag.
//!
//! | preset | content |
//! |--------|---------|
//! | `fig1-top`, `fig1-bottom` | CSBM, α=4, ρ=0.1; acc vs c for three losses and four r |
//! | `fig2-top`, `fig2-bottom` | same on the GLM–SBM |
//! | `fig3-left`, `fig3-right` | `1 − Acc` vs λ at r=10³, c optimised on a grid |
//! | `fig4-left` | simulated c* vs λ on the CSBM |
//! | `fig4-right` | simulated c* vs λ on user-supplied features (`features`, `label_column`) |
//! | `fig5`, `fig6` | α=0.7 and α=2, one CSBM and one GLM–SBM panel |
//! | `fig7` | GLM–SBM `1 − Acc` vs λ for several r, quadratic and logistic |
//! | `fig8` | GLM–SBM interpolation peak in ρ, quadratic loss, d = N/2, damping 0.5 |

use gcnsbm::{LossKind, Model};

use crate::error::CliError;
use crate::grid::parse_grid;
use crate::spec::{Degree, ParamGrid, RunSpec, YAxis};

pub const PRESETS: &[&str] = &[
    "fig1-top",
    "fig1-bottom",
    "fig2-top",
    "fig2-bottom",
    "fig3-left",
    "fig3-right",
    "fig4-left",
    "fig4-right",
    "fig5",
    "fig6",
    "fig7",
    "fig8",
];

fn g(text: &str) -> Vec<f64> {
    parse_grid("preset", text).expect("preset grids are valid")
}

/// The c-vs-accuracy search shared by the fig1, fig2, fig5 and fig6 presets.
fn search(model: Model, alpha: f64, lambda: f64, mu: f64) -> ParamGrid {
    ParamGrid {
        model: vec![model],
        alpha: vec![alpha],
        lambda: vec![lambda],
        mu: vec![mu],
        rho: vec![0.1],
        rho_test: vec![],
        d: vec![Degree::Fixed(30.0)],
        n: vec![10_000],
        loss: LossKind::ALL.to_vec(),
        r: vec![0.1, 1.0, 10.0, 1000.0],
        c: g("0:2:0.5"),
    }
}

fn large_lambda(model: Model, mu: f64) -> ParamGrid {
    ParamGrid {
        model: vec![model],
        alpha: vec![4.0],
        lambda: g("0.5:5:0.5"),
        mu: vec![mu],
        rho: vec![0.1],
        loss: vec![LossKind::Quadratic],
        r: vec![1000.0],
        c: g("0:5:0.05"),
        ..ParamGrid::default()
    }
}

fn c_star_sim() -> ParamGrid {
    ParamGrid {
        model: vec![Model::Csbm],
        alpha: vec![4.0],
        lambda: g("0.5:4:0.5"),
        mu: vec![3.0],
        rho: vec![0.1],
        loss: vec![LossKind::Quadratic],
        r: vec![1000.0],
        c: g("0:3:0.1"),
        ..ParamGrid::default()
    }
}

pub fn apply(spec: &mut RunSpec, name: &str) -> Result<(), CliError> {
    let one = |p: ParamGrid| vec![("main".to_string(), p)];
    let s = &mut spec.settings;
    let panels = match name {
        "fig1-top" => one(search(Model::Csbm, 4.0, 0.5, 1.0)),
        "fig1-bottom" => one(search(Model::Csbm, 4.0, 1.5, 3.0)),
        "fig2-top" => one(search(Model::GlmSbm, 4.0, 0.5, 0.0)),
        "fig2-bottom" => one(search(Model::GlmSbm, 4.0, 1.5, 0.0)),
        "fig3-left" | "fig3-right" => {
            s.c_opt = true;
            s.x = Some("lambda".into());
            s.y = YAxis::ErrTest;
            let model = if name == "fig3-left" { Model::Csbm } else { Model::GlmSbm };
            one(large_lambda(model, 3.0))
        }
        "fig4-left" | "fig4-right" => {
            s.c_opt = true;
            s.x = Some("lambda".into());
            s.y = YAxis::C;
            one(c_star_sim())
        }
        "fig5" => vec![
            ("csbm".to_string(), search(Model::Csbm, 0.7, 1.5, 3.0)),
            ("glm-sbm".to_string(), search(Model::GlmSbm, 0.7, 1.0, 0.0)),
        ],
        "fig6" => vec![
            ("csbm".to_string(), search(Model::Csbm, 2.0, 0.7, 1.0)),
            ("glm-sbm".to_string(), search(Model::GlmSbm, 2.0, 1.0, 0.0)),
        ],
        "fig7" => {
            s.c_opt = true;
            s.x = Some("lambda".into());
            s.y = YAxis::ErrTest;
            one(ParamGrid {
                model: vec![Model::GlmSbm],
                alpha: vec![4.0],
                lambda: g("0.5:5:0.5"),
                mu: vec![0.0],
                rho: vec![0.1],
                loss: vec![LossKind::Quadratic, LossKind::Logistic],
                r: vec![0.01, 1.0, 1000.0],
                c: g("0:3:0.1"),
                ..ParamGrid::default()
            })
        }
        "fig8" => {
            s.x = Some("rho".into());
            // Undamped iteration oscillates near the peak at r = 1e-6.
            s.damping = 0.5;
            s.max_iter = 5000;
            one(ParamGrid {
                model: vec![Model::GlmSbm],
                alpha: vec![2.0],
                lambda: vec![1.0],
                mu: vec![0.0],
                rho: g("0.1:0.9:0.05"),
                d: vec![Degree::Fraction(0.5)],
                loss: vec![LossKind::Quadratic],
                r: vec![1e-6, 0.01, 1.0],
                c: vec![1.0],
                ..ParamGrid::default()
            })
        }
        other => {
            let suggestion = PRESETS
                .iter()
                .map(|p| (strsim::levenshtein(other, p), *p))
                .filter(|(d, _)| *d <= 2)
                .min()
                .map(|(_, p)| format!(" (did you mean `{p}`?)"))
                .unwrap_or_default();
            return Err(CliError::Value {
                key: "preset".into(),
                value: other.into(),
                reason: format!("unknown preset{suggestion}; known: {}", PRESETS.join(", ")),
            });
        }
    };
    spec.panels = panels;
    spec.preset = Some(name.to_string());
    Ok(())
}
