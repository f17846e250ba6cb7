//! CSV schemas for the experiment rows.
//!
//! Floats are written in their shortest round-trip form (`{:?}`), so reading
//! a file back yields bit-identical rows.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qkl_core::experiments::{
    AlignmentCurveRow, AlignmentRow, ConcentrationRow, GeneralizationRow, HaarMomentRow, ShotCostRow, SpectrumRow,
};
use qkl_core::kernels::KernelKind;

use crate::error::{QklError, Result};

/// A row type with a fixed CSV schema.
pub trait Record: Sized + Clone {
    const HEADER: &'static [&'static str];

    fn fields(&self) -> Vec<String>;

    fn parse(fields: &[&str]) -> Result<Self>;

    /// Output order.
    fn order(&self, other: &Self) -> Ordering;
}

fn float(v: f64) -> String {
    format!("{v:?}")
}

fn field<T: std::str::FromStr>(fields: &[&str], i: usize, name: &str) -> Result<T> {
    let raw = fields
        .get(i)
        .ok_or_else(|| QklError::Format(format!("missing column {name}")))?;
    raw.parse()
        .map_err(|_| QklError::Format(format!("bad value {raw:?} in column {name}")))
}

fn kernel(fields: &[&str], i: usize) -> Result<KernelKind> {
    let raw = fields.get(i).copied().unwrap_or_default();
    KernelKind::from_tag(raw).ok_or_else(|| QklError::Format(format!("unknown kernel tag {raw:?}")))
}

impl Record for GeneralizationRow {
    const HEADER: &'static [&'static str] = &["d", "seed", "kernel", "lambda", "train_mse", "test_mse", "best_test"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.seed.to_string(),
            self.kernel.tag().to_string(),
            float(self.lambda),
            float(self.train_mse),
            float(self.test_mse),
            self.best_test.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        Ok(Self {
            d: field(f, 0, "d")?,
            seed: field(f, 1, "seed")?,
            kernel: kernel(f, 2)?,
            lambda: field(f, 3, "lambda")?,
            train_mse: field(f, 4, "train_mse")?,
            test_mse: field(f, 5, "test_mse")?,
            best_test: field(f, 6, "best_test")?,
        })
    }

    fn order(&self, o: &Self) -> Ordering {
        (self.d, self.seed, self.kernel)
            .cmp(&(o.d, o.seed, o.kernel))
            .then(self.lambda.total_cmp(&o.lambda))
    }
}

impl Record for SpectrumRow {
    const HEADER: &'static [&'static str] = &["d", "seed", "rank", "eigenvalue"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.seed.to_string(),
            self.rank.to_string(),
            float(self.eigenvalue),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        Ok(Self {
            d: field(f, 0, "d")?,
            seed: field(f, 1, "seed")?,
            rank: field(f, 2, "rank")?,
            eigenvalue: field(f, 3, "eigenvalue")?,
        })
    }

    fn order(&self, o: &Self) -> Ordering {
        (self.d, self.seed, self.rank).cmp(&(o.d, o.seed, o.rank))
    }
}

impl Record for AlignmentRow {
    const HEADER: &'static [&'static str] = &["d", "seed", "kernel", "kta"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.seed.to_string(),
            self.kernel.tag().to_string(),
            float(self.kta),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        Ok(Self {
            d: field(f, 0, "d")?,
            seed: field(f, 1, "seed")?,
            kernel: kernel(f, 2)?,
            kta: field(f, 3, "kta")?,
        })
    }

    fn order(&self, o: &Self) -> Ordering {
        (self.d, self.seed, self.kernel).cmp(&(o.d, o.seed, o.kernel))
    }
}

impl Record for AlignmentCurveRow {
    const HEADER: &'static [&'static str] = &["d", "seed", "kernel", "i", "C"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.seed.to_string(),
            self.kernel.tag().to_string(),
            self.i.to_string(),
            float(self.c),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        Ok(Self {
            d: field(f, 0, "d")?,
            seed: field(f, 1, "seed")?,
            kernel: kernel(f, 2)?,
            i: field(f, 3, "i")?,
            c: field(f, 4, "C")?,
        })
    }

    fn order(&self, o: &Self) -> Ordering {
        (self.d, self.seed, self.kernel, self.i).cmp(&(o.d, o.seed, o.kernel, o.i))
    }
}

impl Record for HaarMomentRow {
    const HEADER: &'static [&'static str] = &["moment_id", "empirical", "analytic", "stderr"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.moment_id.clone(),
            float(self.empirical),
            float(self.analytic),
            float(self.stderr),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        Ok(Self {
            moment_id: field(f, 0, "moment_id")?,
            empirical: field(f, 1, "empirical")?,
            analytic: field(f, 2, "analytic")?,
            stderr: field(f, 3, "stderr")?,
        })
    }

    // Generation order already groups first and second moments.
    fn order(&self, _: &Self) -> Ordering {
        Ordering::Equal
    }
}

impl Record for ConcentrationRow {
    const HEADER: &'static [&'static str] = &["d", "mean_dev", "variance", "stderr"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            float(self.mean_dev),
            float(self.variance),
            float(self.stderr),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        Ok(Self {
            d: field(f, 0, "d")?,
            mean_dev: field(f, 1, "mean_dev")?,
            variance: field(f, 2, "variance")?,
            stderr: field(f, 3, "stderr")?,
        })
    }

    fn order(&self, o: &Self) -> Ordering {
        self.d.cmp(&o.d)
    }
}

impl Record for ShotCostRow {
    const HEADER: &'static [&'static str] = &["d", "signal", "per_shot_variance", "shots_needed"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            float(self.signal),
            float(self.per_shot_variance),
            float(self.shots_needed),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self> {
        Ok(Self {
            d: field(f, 0, "d")?,
            signal: field(f, 1, "signal")?,
            per_shot_variance: field(f, 2, "per_shot_variance")?,
            shots_needed: field(f, 3, "shots_needed")?,
        })
    }

    fn order(&self, o: &Self) -> Ordering {
        self.d.cmp(&o.d)
    }
}

/// Header plus rows in [`Record::order`], LF line endings.
pub fn write_csv<R: Record, W: Write>(rows: &[R], out: W) -> Result<()> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(R::order);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(R::HEADER)?;
    for row in &sorted {
        writer.write_record(row.fields())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_csv<R: Record>(rows: &[R], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| QklError::io(path, e))?;
    write_csv(rows, BufWriter::new(file))
}

pub fn parse_csv<R: Record>(text: &str) -> Result<Vec<R>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(QklError::Format(format!(
            "expected header {:?}, found {:?}",
            R::HEADER,
            header.iter().collect::<Vec<_>>()
        )));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            R::parse(&rec.iter().collect::<Vec<_>>())
        })
        .collect()
}

pub fn read_csv<R: Record>(path: &Path) -> Result<Vec<R>> {
    let text = std::fs::read_to_string(path).map_err(|e| QklError::io(path, e))?;
    parse_csv(&text)
}
