//! Table cells: the hard-coded simulation grids and the `--cells` syntax.

use condens::{EstimatorKind, Example, ExampleId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub example: Example,
    pub estimator: EstimatorKind,
    pub x: f64,
    pub n: usize,
    pub eta: f64,
    pub fx_known: bool,
}

pub const PRESET_NAMES: [&str; 8] = [
    "table1", "table2", "table3", "table4", "table5", "table6", "table7", "table8",
];

const SAMPLE_SIZES: [usize; 3] = [250, 500, 1000];
const ETAS: [f64; 5] = [-0.2, 0.5, 1.0, 2.0, 3.0];

/// Cells of a preset, ordered by fx mode, then `x`, then `n`, then `eta`.
pub fn preset(name: &str) -> Option<Vec<Cell>> {
    use EstimatorKind::{Kernel, Projection};
    let (id, estimator, xs, fx_modes): (ExampleId, EstimatorKind, &[f64], &[bool]) = match name {
        "table1" => (ExampleId::Ex1, Kernel, &[0.5], &[true, false]),
        "table2" => (ExampleId::Ex1, Projection, &[0.5], &[false]),
        "table3" => (ExampleId::Ex2, Kernel, &[0.5], &[true, false]),
        "table4" => (ExampleId::Ex2, Projection, &[0.5], &[false]),
        "table5" => (ExampleId::Ex3, Kernel, &[0.0, 0.36, 1.0], &[false]),
        "table6" => (ExampleId::Ex3, Projection, &[0.0, 0.36, 1.0], &[false]),
        "table7" => (ExampleId::Ex4, Kernel, &[0.0, 0.36, 1.0], &[false]),
        "table8" => (ExampleId::Ex4, Projection, &[0.0, 0.36, 1.0], &[false]),
        _ => return None,
    };
    let mut cells = Vec::new();
    for &fx_known in fx_modes {
        for &x in xs {
            for n in SAMPLE_SIZES {
                for eta in ETAS {
                    cells.push(Cell {
                        example: id.into(),
                        estimator,
                        x,
                        n,
                        eta,
                        fx_known,
                    });
                }
            }
        }
    }
    Some(cells)
}

/// Parses `example:estimator:x:n:eta:fx` cells separated by `;`, where `fx`
/// is `known` or `unknown`.
pub fn parse_cells(spec: &str) -> Result<Vec<Cell>, String> {
    let cells = spec
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_cell)
        .collect::<Result<Vec<_>, _>>()?;
    if cells.is_empty() {
        return Err("empty cell list".into());
    }
    Ok(cells)
}

fn parse_cell(s: &str) -> Result<Cell, String> {
    let bad = |what: &str| format!("cell `{s}`: invalid {what}");
    let f: Vec<&str> = s.split(':').map(str::trim).collect();
    if f.len() != 6 {
        return Err(format!("cell `{s}`: expected example:estimator:x:n:eta:fx"));
    }
    Ok(Cell {
        example: f[0].parse().map_err(|_| bad("example"))?,
        estimator: f[1].parse().map_err(|_| bad("estimator"))?,
        x: f[2].parse().map_err(|_| bad("x"))?,
        n: f[3].parse().map_err(|_| bad("n"))?,
        eta: f[4].parse().map_err(|_| bad("eta"))?,
        fx_known: match f[5].to_ascii_lowercase().as_str() {
            "known" | "true" => true,
            "unknown" | "false" => false,
            _ => return Err(bad("fx mode")),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_sizes() {
        let sizes: Vec<usize> = PRESET_NAMES.iter().map(|p| preset(p).unwrap().len()).collect();
        assert_eq!(sizes, [30, 15, 30, 15, 45, 45, 45, 45]);
        assert!(preset("table9").is_none());
    }

    #[test]
    fn cell_syntax() {
        let cells = parse_cells("ex1:kernel:0.5:250:-0.2:known; ex3:projection:0.36:500:1:unknown").unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells[0].fx_known && cells[0].eta == -0.2);
        assert_eq!(cells[1].estimator, EstimatorKind::Projection);
        assert!(parse_cells(" ; ").is_err());
        assert!(parse_cells("ex1:kernel:0.5:250:1").is_err());
        assert!(parse_cells("ex1:kernel:0.5:250:1:sometimes").is_err());
    }
}
