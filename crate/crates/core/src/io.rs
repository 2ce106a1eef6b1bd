//! Plain-text field file format.
//!
//! ```text
//! FIELD v1 dim=<d> components=<k> counts=<n1,...> lo=<...> hi=<...>
//! <k values for point 0>
//! <k values for point 1>
//! ...
//! ```
//!
//! Points are listed in row-major order (last axis fastest).

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, ScalarField, VectorField};

/// Grid plus an arbitrary number of per-point components.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldData {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

impl FieldData {
    pub fn into_scalar(self) -> Result<ScalarField> {
        if self.components.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "expected a scalar field, file has {} components",
                self.components.len()
            )));
        }
        let mut c = self.components;
        ScalarField::new(self.grid, c.pop().unwrap())
    }

    pub fn into_vector(self) -> Result<VectorField> {
        VectorField::new(self.grid, self.components)
    }
}

impl From<&ScalarField> for FieldData {
    fn from(s: &ScalarField) -> Self {
        Self {
            grid: s.grid.clone(),
            components: vec![s.values.clone()],
        }
    }
}

impl From<&VectorField> for FieldData {
    fn from(v: &VectorField) -> Self {
        Self {
            grid: v.grid.clone(),
            components: v.components.clone(),
        }
    }
}

fn join(xs: impl Iterator<Item = String>) -> String {
    xs.collect::<Vec<_>>().join(",")
}

pub fn write_field<W: Write>(mut w: W, field: &FieldData) -> Result<()> {
    let g = &field.grid;
    writeln!(
        w,
        "FIELD v1 dim={} components={} counts={} lo={} hi={}",
        g.dim(),
        field.components.len(),
        join(g.axes().iter().map(|a| a.count.to_string())),
        join(g.axes().iter().map(|a| a.lo.to_string())),
        join(g.axes().iter().map(|a| a.hi.to_string())),
    )?;
    let mut line = String::new();
    for i in 0..g.len() {
        line.clear();
        for (k, c) in field.components.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            // `Display` for f64 prints the shortest representation that round-trips.
            write!(line, "{}", c[i]).unwrap();
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_field<R: BufRead>(r: R) -> Result<FieldData> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = header?;
    let (grid, ncomp) = parse_header(&header)?;

    let mut components = vec![Vec::with_capacity(grid.len()); ncomp];
    let mut read = 0;
    for (ln, line) in lines {
        let line = line?;
        let line_no = ln + 1;
        if line.trim().is_empty() {
            continue;
        }
        if read == grid.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: "more data lines than grid points".into(),
            });
        }
        let mut n = 0;
        for tok in line.split_whitespace() {
            if n == ncomp {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {ncomp} values"),
                });
            }
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad number {tok:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "non-finite value".into(),
                });
            }
            components[n].push(v);
            n += 1;
        }
        if n != ncomp {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {ncomp} values, got {n}"),
            });
        }
        read += 1;
    }
    if read != grid.len() {
        return Err(Error::Parse {
            line: read + 2,
            msg: format!("expected {} data lines, got {read}", grid.len()),
        });
    }
    Ok(FieldData { grid, components })
}

fn parse_header(header: &str) -> Result<(Grid, usize)> {
    let err = |msg: String| Error::Parse { line: 1, msg };
    let mut toks = header.split_whitespace();
    if toks.next() != Some("FIELD") || toks.next() != Some("v1") {
        return Err(err("header must start with `FIELD v1`".into()));
    }
    let (mut dim, mut ncomp, mut counts, mut lo, mut hi) = (None, None, None, None, None);
    for tok in toks {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header token {tok:?}")))?;
        let list = |parse: &dyn Fn(&str) -> bool| -> Result<Vec<String>> {
            let items: Vec<String> = val.split(',').map(str::to_owned).collect();
            if items.iter().all(|s| parse(s)) {
                Ok(items)
            } else {
                Err(err(format!("bad value list for {key}")))
            }
        };
        match key {
            "dim" => dim = Some(val.parse::<usize>().map_err(|_| err("bad dim".into()))?),
            "components" => {
                ncomp = Some(
                    val.parse::<usize>()
                        .map_err(|_| err("bad components".into()))?,
                )
            }
            "counts" => {
                counts = Some(
                    list(&|s| s.parse::<usize>().is_ok())?
                        .iter()
                        .map(|s| s.parse::<usize>().unwrap())
                        .collect::<Vec<_>>(),
                )
            }
            "lo" | "hi" => {
                let v = list(&|s| s.parse::<f64>().is_ok())?
                    .iter()
                    .map(|s| s.parse::<f64>().unwrap())
                    .collect::<Vec<_>>();
                if key == "lo" {
                    lo = Some(v)
                } else {
                    hi = Some(v)
                }
            }
            _ => return Err(err(format!("unknown header key {key:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| err("missing dim".into()))?;
    let ncomp = ncomp.ok_or_else(|| err("missing components".into()))?;
    let counts = counts.ok_or_else(|| err("missing counts".into()))?;
    let lo = lo.ok_or_else(|| err("missing lo".into()))?;
    let hi = hi.ok_or_else(|| err("missing hi".into()))?;
    if counts.len() != dim || lo.len() != dim || hi.len() != dim {
        return Err(err(format!("counts/lo/hi must each have {dim} entries")));
    }
    if ncomp == 0 {
        return Err(err("components must be positive".into()));
    }
    let axes = (0..dim)
        .map(|a| Axis::new(lo[a], hi[a], counts[a]))
        .collect();
    let grid = Grid::new(axes).map_err(|e| err(e.to_string()))?;
    Ok((grid, ncomp))
}

pub fn save(path: impl AsRef<Path>, field: &FieldData) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<FieldData> {
    let f = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reports_parse_location() {
        let text = "FIELD v1 dim=1 components=2 counts=3 lo=0 hi=1\n1 2\n3 x\n5 6\n";
        match read_field(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short = "FIELD v1 dim=1 components=1 counts=3 lo=0 hi=1\n1\n2\n";
        assert!(matches!(
            read_field(short.as_bytes()),
            Err(Error::Parse { .. })
        ));
        let bad_header = "FIELD v2 dim=1";
        assert!(matches!(
            read_field(bad_header.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(vals in prop::collection::vec(-1e300f64..1e300, 24), lo in -10.0f64..0.0, hi in 0.5f64..10.0) {
            let grid = Grid::new(vec![Axis::new(lo, hi, 4), Axis::new(0.0, hi, 3)]).unwrap();
            let field = FieldData { grid, components: vec![vals[..12].to_vec(), vals[12..].to_vec()] };
            let mut buf = Vec::new();
            write_field(&mut buf, &field).unwrap();
            let back = read_field(buf.as_slice()).unwrap();
            prop_assert_eq!(back, field);
        }
    }
}
