//! Named experiment configs, one per published run, each carrying the
//! trainable-parameter count it must reproduce.

use crate::ansatz::{count_parameters, CellKind};
use crate::config::{ConfigError, ExperimentConfig};
use crate::hamiltonian::ModelKind;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub config: ExperimentConfig,
    /// Published trainable-parameter count of the ansatz.
    pub expected_params: usize,
    /// Finishes in minutes on one CPU; everything else takes hours to days.
    pub desk_scale: bool,
}

impl Preset {
    pub fn name(&self) -> &str {
        &self.config.name
    }

    /// Validate the config and compare the parameter count with the table.
    pub fn check(&self) -> Result<(), ConfigError> {
        let exp = self.config.validate()?;
        let got = count_parameters(&exp.ansatz).map_err(|e| ConfigError::Invalid {
            key: "cell",
            message: e.to_string(),
        })?;
        if got != self.expected_params {
            return Err(ConfigError::Invalid {
                key: "hidden",
                message: format!("preset {} has {got} parameters, expected {}", self.name(), self.expected_params),
            });
        }
        Ok(())
    }
}

/// Real-valued GRU: `3h² + 9h + 2`; with the phase head `3h² + 13h + 4`.
fn gru_params(h: usize, complex: bool) -> usize {
    if complex {
        3 * h * h + 13 * h + 4
    } else {
        3 * h * h + 9 * h + 2
    }
}

fn cell_tag(cell: CellKind) -> &'static str {
    match cell {
        CellKind::ERnn => "ernn",
        CellKind::EGru => "egru",
        CellKind::HGru => "hgru",
        CellKind::ERnn2D => "2drnn",
    }
}

fn base(name: String, model: ModelKind, cell: CellKind, hidden: usize, epochs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(&name, model, cell);
    c.hidden = hidden;
    c.epochs = epochs;
    c
}

fn tfim1d() -> Vec<Preset> {
    let mut out = Vec::new();
    for n in [20, 40, 80, 100] {
        for (cell, expected) in [(CellKind::ERnn, 2752), (CellKind::EGru, 8052), (CellKind::HGru, 8052)] {
            let mut c = base(format!("tfim1d_n{n}_{}", cell_tag(cell)), ModelKind::Tfim1D, cell, 50, 120);
            c.n = Some(n);
            out.push(Preset {
                config: c,
                expected_params: expected,
                desk_scale: n == 20,
            });
        }
    }
    out
}

fn tfim2d() -> Vec<Preset> {
    let mut out = Vec::new();
    let one_d_epochs = [450, 450, 350, 350];
    let two_d_epochs = [200, 300, 350, 350];
    for (k, l) in [5usize, 7, 8, 9].into_iter().enumerate() {
        for (cell, expected, epochs) in [
            (CellKind::EGru, 8052, one_d_epochs[k]),
            (CellKind::HGru, 8052, one_d_epochs[k]),
            (CellKind::ERnn2D, 5352, two_d_epochs[k]),
        ] {
            let mut c = base(format!("tfim2d_{l}x{l}_{}", cell_tag(cell)), ModelKind::Tfim2D, cell, 50, epochs);
            c.rows = Some(l);
            c.cols = Some(l);
            c.j = 1.0;
            c.b = 3.0;
            out.push(Preset {
                config: c,
                expected_params: expected,
                desk_scale: false,
            });
        }
    }
    out
}

fn j1j2() -> Vec<Preset> {
    let mut out = Vec::new();
    for (j2, h_hyp) in [(0.0, 60), (0.2, 75), (0.5, 70), (0.8, 75)] {
        for (cell, h) in [(CellKind::EGru, 75), (CellKind::HGru, h_hyp)] {
            let mut c = base(
                format!("j1j2_n50_{j2:.1}_{}{h}", cell_tag(cell)),
                ModelKind::J1J2,
                cell,
                h,
                450,
            );
            c.n = Some(50);
            c.j2 = j2;
            // The one published run that trained stably without clipping.
            if cell == CellKind::HGru && j2 == 0.5 {
                c.clip = Some("none".into());
            }
            out.push(Preset {
                config: c,
                expected_params: gru_params(h, true),
                desk_scale: false,
            });
        }
    }
    out
}

fn j1j2j3() -> Vec<Preset> {
    let mut out = Vec::new();
    let mut push = |set: u8, j2: f64, j3: f64, cell: CellKind, h: usize, epochs: usize| {
        let mut c = base(
            format!("j1j2j3_set{set}_{j2:.1}_{j3:.1}_{}{h}", cell_tag(cell)),
            ModelKind::J1J2J3,
            cell,
            h,
            epochs,
        );
        c.n = Some(30);
        c.j2 = j2;
        c.j3 = j3;
        out.push(Preset {
            config: c,
            expected_params: gru_params(h, true),
            desk_scale: false,
        });
    };
    for (j2, j3) in [(0.0, 0.5), (0.2, 0.2), (0.2, 0.5), (0.5, 0.2)] {
        push(1, j2, j3, CellKind::EGru, 50, 280);
        push(1, j2, j3, CellKind::HGru, 50, 280);
    }
    push(2, 0.2, 0.5, CellKind::EGru, 60, 450);
    push(2, 0.2, 0.5, CellKind::HGru, 55, 450);
    push(2, 0.5, 0.2, CellKind::EGru, 60, 500);
    push(2, 0.5, 0.2, CellKind::HGru, 57, 500);
    out
}

/// Every published experiment, in table order.
pub fn preset_catalog() -> Vec<Preset> {
    [tfim1d(), tfim2d(), j1j2(), j1j2j3()].concat()
}

/// Look a preset up by name. J1J2 runs may also be named without the `J2`
/// value (`j1j2_n50_hgru60`) when that leaves exactly one candidate.
pub fn find_preset(name: &str) -> Option<Preset> {
    let catalog = preset_catalog();
    if let Some(p) = catalog.iter().find(|p| p.name() == name) {
        return Some(p.clone());
    }
    let (prefix, tail) = name.rsplit_once('_')?;
    let mut hits = catalog.into_iter().filter(|p| {
        p.name()
            .rsplit_once('_')
            .and_then(|(head, t)| head.rsplit_once('_').map(|(h, _)| (h, t)))
            .is_some_and(|(h, t)| h == prefix && t == tail && h.starts_with("j1j2_"))
    });
    let first = hits.next()?;
    hits.next().is_none().then_some(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_shape_and_counts() {
        let cat = preset_catalog();
        assert_eq!(cat.len(), 12 + 12 + 8 + 12);
        for p in &cat {
            p.check().unwrap_or_else(|e| panic!("{}: {e}", p.name()));
        }
        let mut names: Vec<_> = cat.iter().map(|p| p.name().to_string()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), cat.len());
    }

    #[test]
    fn named_examples() {
        let p = find_preset("j1j2_n50_hgru60").unwrap();
        assert_eq!(p.config.hidden, 60);
        assert_eq!(p.config.j2, 0.0);
        assert!(find_preset("j1j2_n50_hgru75").is_none(), "ambiguous between J2 = 0.2 and 0.8");
        assert_eq!(find_preset("tfim2d_9x9_2drnn").unwrap().expected_params, 5352);
        let p = find_preset("j1j2j3_set2_0.5_0.2_hgru57").unwrap();
        assert_eq!((p.config.hidden, p.expected_params, p.config.epochs), (57, 10492, 500));
        let p = find_preset("tfim1d_n20_egru").unwrap();
        assert!(p.desk_scale);
        assert_eq!((p.config.hidden, p.config.batch_size, p.config.epochs), (50, 50, 120));
    }

    #[test]
    fn wrong_count_is_reported() {
        let mut p = find_preset("tfim1d_n20_ernn").unwrap();
        p.expected_params += 1;
        assert!(p.check().is_err());
    }
}
