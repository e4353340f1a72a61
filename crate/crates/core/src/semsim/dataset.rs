use std::io::{Read, Write};

use crate::graph::NodeSet;
use crate::interventions::TargetFamily;
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

/// One sample matrix per target of `fam`, in family order, all with `p`
/// columns aligned to nodes `1..=p`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiDataset<T> {
    fam: TargetFamily,
    blocks: Vec<Matrix<T>>,
}

impl<T: Scalar> MultiDataset<T> {
    pub fn new(fam: TargetFamily, blocks: Vec<Matrix<T>>) -> Result<Self> {
        if blocks.len() != fam.len() {
            return Err(Error::invalid(format!(
                "{} blocks for {} targets",
                blocks.len(),
                fam.len()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.cols() != fam.p() {
                return Err(Error::invalid(format!(
                    "block {k} has {} columns, expected {}",
                    b.cols(),
                    fam.p()
                )));
            }
            if b.rows() == 0 {
                return Err(Error::invalid(format!("block {k} is empty")));
            }
        }
        Ok(MultiDataset { fam, blocks })
    }

    pub fn fam(&self) -> &TargetFamily {
        &self.fam
    }

    pub fn p(&self) -> usize {
        self.fam.p()
    }

    pub fn blocks(&self) -> &[Matrix<T>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &Matrix<T> {
        &self.blocks[k]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.blocks.iter().map(Matrix::rows).collect()
    }

    /// Rows of the listed blocks stacked in the given order.
    pub fn stacked(&self, which: &[usize]) -> Matrix<T> {
        let mut out = Matrix::zeros(0, self.p());
        for &k in which {
            out = out.vstack(&self.blocks[k]);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["block".to_string(), "target".to_string()];
        header.extend((1..=self.p()).map(|v| format!("X{v}")));
        out.write_record(&header).map_err(csv_io)?;
        for (k, b) in self.blocks.iter().enumerate() {
            let target = target_label(self.fam.target(k));
            for r in 0..b.rows() {
                let mut rec = vec![k.to_string(), target.clone()];
                rec.extend(b.row(r).iter().map(|x| x.to_string()));
                out.write_record(&rec).map_err(csv_io)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Reads the `block,target,X1..Xp` layout. Block indices must cover
    /// `0..K` and every row of a block must carry the same target.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers().map_err(|e| Error::parse("header", e.to_string()))?.clone();
        if header.len() < 3 || &header[0] != "block" || &header[1] != "target" {
            return Err(Error::parse("header", "expected `block,target,X1,...,Xp`"));
        }
        let p = header.len() - 2;
        for (c, name) in header.iter().skip(2).enumerate() {
            if name != format!("X{}", c + 1) {
                return Err(Error::parse(
                    format!("header, column {}", c + 3),
                    format!("expected `X{}`, found `{name}`", c + 1),
                ));
            }
        }
        let mut targets: Vec<Option<NodeSet>> = Vec::new();
        let mut rows: Vec<Vec<T>> = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let line = n + 2;
            let rec = rec.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
            if rec.len() != p + 2 {
                return Err(Error::parse(
                    format!("line {line}"),
                    format!("expected {} fields, found {}", p + 2, rec.len()),
                ));
            }
            let k: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(format!("line {line}, field `block`"), "not a block index"))?;
            let t = parse_target(rec[1].trim(), p)
                .map_err(|m| Error::parse(format!("line {line}, field `target`"), m))?;
            if k >= targets.len() {
                targets.resize(k + 1, None);
                rows.resize(k + 1, Vec::new());
            }
            match targets[k] {
                None => targets[k] = Some(t),
                Some(prev) if prev != t => {
                    return Err(Error::parse(
                        format!("line {line}, field `target`"),
                        format!("block {k} was declared with target {}", target_label(&prev)),
                    ))
                }
                _ => {}
            }
            for c in 0..p {
                let x: T = rec[c + 2].trim().parse().map_err(|_| {
                    Error::parse(format!("line {line}, field `X{}`", c + 1), "not a number")
                })?;
                if !x.is_finite() {
                    return Err(Error::parse(format!("line {line}, field `X{}`", c + 1), "not finite"));
                }
                rows[k].push(x);
            }
        }
        if targets.is_empty() {
            return Err(Error::parse("data", "no rows"));
        }
        if let Some(k) = targets.iter().position(Option::is_none) {
            return Err(Error::parse("data", format!("block {k} has no rows")));
        }
        let fam = TargetFamily::new(p, targets.into_iter().map(Option::unwrap).collect())?;
        let blocks = rows
            .into_iter()
            .map(|v| Matrix::from_vec(v.len() / p, p, v))
            .collect();
        MultiDataset::new(fam, blocks)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn target_label(t: &NodeSet) -> String {
    if t.is_empty() {
        "obs".to_string()
    } else {
        t.to_labels().iter().map(usize::to_string).collect::<Vec<_>>().join(";")
    }
}

fn parse_target(s: &str, p: usize) -> std::result::Result<NodeSet, String> {
    if s == "obs" {
        return Ok(NodeSet::empty());
    }
    let labels = s
        .split(';')
        .map(|x| x.trim().parse::<usize>().map_err(|_| format!("bad node label `{x}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    NodeSet::from_labels(&labels, p).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MultiDataset<f64> {
        let fam = TargetFamily::from_labels(2, &[&[], &[2], &[1, 2]]).unwrap();
        let blocks = vec![
            Matrix::from_rows(&[vec![0.1, -2.5], vec![1e-17, 3.0]]),
            Matrix::from_rows(&[vec![0.3, 0.25]]),
            Matrix::from_rows(&[vec![-1.0, 1.0 / 3.0]]),
        ];
        MultiDataset::new(fam, blocks).unwrap()
    }

    #[test]
    fn csv_layout() {
        let text = small().to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("block,target,X1,X2"));
        assert_eq!(lines.next(), Some("0,obs,0.1,-2.5"));
        assert_eq!(lines.nth(1), Some("1,2,0.3,0.25"));
        assert!(lines.next().unwrap().starts_with("2,1;2,-1,0.333"));
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let d = small();
        assert_eq!(MultiDataset::<f64>::from_csv_str(&d.to_csv_string()).unwrap(), d);
    }

    #[test]
    fn csv_errors_name_the_location() {
        let bad = "block,target,X1\n0,obs,1.0\n0,2,3.0\n";
        let e = MultiDataset::<f64>::from_csv_str(bad).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let bad = "block,target,X1\n0,obs,abc\n";
        let e = MultiDataset::<f64>::from_csv_str(bad).unwrap_err().to_string();
        assert!(e.contains("X1"), "{e}");
        let gap = "block,target,X1\n1,obs,1.0\n";
        assert!(MultiDataset::<f64>::from_csv_str(gap).is_err());
    }

    #[test]
    fn shape_checks() {
        let fam = TargetFamily::observational(2);
        assert!(MultiDataset::<f64>::new(fam.clone(), vec![Matrix::zeros(0, 2)]).is_err());
        assert!(MultiDataset::<f64>::new(fam, vec![Matrix::zeros(3, 1)]).is_err());
    }
}
