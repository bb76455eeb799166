//! CSV datasets with header `x1,...,xd[,y]`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn dims(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(x, y)` pairs; fails when the file had no label column.
    pub fn pairs(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Parse("dataset has no `y` column".into()))?;
        Ok(self.points.iter().cloned().zip(labels.iter().copied()).collect())
    }
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, bool)> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_y = names.last() == Some(&"y");
    let dims = names.len() - usize::from(has_y);
    if dims == 0 {
        return Err(Error::Parse("header needs at least `x1`".into()));
    }
    for (k, name) in names[..dims].iter().enumerate() {
        if *name != format!("x{}", k + 1) {
            return Err(Error::Parse(format!("column {} is `{name}`, expected `x{}`", k + 1, k + 1)));
        }
    }
    Ok((dims, has_y))
}

pub fn read_dataset_from<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let (dims, has_y) = parse_header(rdr.headers()?)?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{s}` is not a number", row + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(k) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfDomain {
                index: row,
                value: values[k],
            });
        }
        let (x, y) = values.split_at(dims);
        points.push(x.to_vec());
        if has_y {
            labels.push(y[0]);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset {
        points,
        labels: has_y.then_some(labels),
    })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset_from(file)
}

pub fn write_dataset_to<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let dims = dataset.dims();
    let mut header: Vec<String> = (1..=dims).map(|k| format!("x{k}")).collect();
    if dataset.labels.is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for (i, p) in dataset.points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(f64::to_string).collect();
        if let Some(labels) = &dataset.labels {
            row.push(labels[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_dataset_to(file, dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let ds = Dataset {
            points: vec![vec![0.1, 0.25], vec![1.0, 0.0]],
            labels: Some(vec![1.0, 0.0]),
        };
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &ds).unwrap();
        assert!(buf.starts_with(b"x1,x2,y\n"));
        assert_eq!(read_dataset_from(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn unlabeled_and_bad_inputs() {
        let ds = read_dataset_from("x1\n0.5\n0.75\n".as_bytes()).unwrap();
        assert_eq!(ds.labels, None);
        assert_eq!(ds.dims(), 1);
        assert!(read_dataset_from("x2\n0.5\n".as_bytes()).is_err());
        assert!(read_dataset_from("x1\n1.5\n".as_bytes()).is_err());
        assert!(read_dataset_from("x1\nabc\n".as_bytes()).is_err());
        assert!(matches!(read_dataset_from("x1,y\n".as_bytes()), Err(Error::EmptyDataset)));
    }
}
