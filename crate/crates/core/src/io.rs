//! File formats: dense tensors (text and binary), Kruskal factorizations
//! (text), and solver traces (CSV).
//!
//! Floats are serialized with 17 significant digits so that
//! write -> read -> write reproduces identical bytes.

use crate::alm::RunTrace;
use crate::error::{Error, Result};
use crate::kruskal::KruskalTensor;
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;
use std::io::{BufRead, Read, Write};

const BINARY_MAGIC: &[u8; 4] = b"OTNS";

fn fmt_float(v: f64) -> String {
    format!("{:.16e}", v)
}

fn parse_float(s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad float {:?}", s)))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value {}", v)));
    }
    Ok(v)
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad integer {:?}", s)))
}

pub fn write_tensor_text(w: &mut impl Write, a: &DenseTensor) -> Result<()> {
    writeln!(w, "tensor v1")?;
    let dims: Vec<String> = a.dims().iter().map(|d| d.to_string()).collect();
    writeln!(w, "dims: {}", dims.join(" "))?;
    for v in a.values() {
        writeln!(w, "{}", fmt_float(*v))?;
    }
    Ok(())
}

pub fn read_tensor_text(r: &mut impl BufRead) -> Result<DenseTensor> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty tensor file".into()))??;
    if header.trim() != "tensor v1" {
        return Err(Error::Parse(format!("bad header {:?}", header)));
    }
    let dims_line = lines
        .next()
        .ok_or_else(|| Error::Parse("missing dims line".into()))??;
    let dims = parse_dims_line(&dims_line)?;
    let count: usize = dims.iter().product();
    let mut values = Vec::with_capacity(count);
    for line in lines {
        for tok in line?.split_whitespace() {
            values.push(parse_float(tok)?);
        }
    }
    if values.len() != count {
        return Err(Error::Parse(format!(
            "expected {} values, found {}",
            count,
            values.len()
        )));
    }
    DenseTensor::from_values(&dims, values)
}

fn parse_dims_line(line: &str) -> Result<Vec<usize>> {
    let rest = line
        .trim()
        .strip_prefix("dims:")
        .ok_or_else(|| Error::Parse(format!("bad dims line {:?}", line)))?;
    let dims: Result<Vec<usize>> = rest.split_whitespace().map(parse_usize).collect();
    let dims = dims?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Parse("dims must be positive".into()));
    }
    Ok(dims)
}

pub fn write_tensor_binary(w: &mut impl Write, a: &DenseTensor) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(a.ndim() as u32).to_le_bytes())?;
    for &d in a.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in a.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor_binary(r: &mut impl Read) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse("bad magic bytes".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let nmodes = u32::from_le_bytes(b4) as usize;
    if nmodes == 0 || nmodes > 64 {
        return Err(Error::Parse(format!("implausible mode count {}", nmodes)));
    }
    let mut dims = Vec::with_capacity(nmodes);
    let mut b8 = [0u8; 8];
    for _ in 0..nmodes {
        r.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let count: usize = dims.iter().product();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        let v = f64::from_le_bytes(b8);
        if !v.is_finite() {
            return Err(Error::Parse("non-finite value in binary tensor".into()));
        }
        values.push(v);
    }
    DenseTensor::from_values(&dims, values)
}

pub fn write_kruskal_text(w: &mut impl Write, k: &KruskalTensor) -> Result<()> {
    writeln!(w, "kruskal v1")?;
    let dims: Vec<String> = k.dims().iter().map(|d| d.to_string()).collect();
    writeln!(w, "dims: {}", dims.join(" "))?;
    writeln!(w, "rank: {}", k.rank())?;
    if let Some(weights) = &k.weights {
        let ws: Vec<String> = weights.iter().map(|v| fmt_float(*v)).collect();
        writeln!(w, "weights: {}", ws.join(" "))?;
    }
    for (n, f) in k.factors.iter().enumerate() {
        writeln!(w, "mode {}", n + 1)?;
        for i in 0..f.rows() {
            let row: Vec<String> = (0..f.cols()).map(|j| fmt_float(f.get(i, j))).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_kruskal_text(r: &mut impl BufRead) -> Result<KruskalTensor> {
    let mut lines = r.lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse("truncated kruskal file".into()))?
            .map_err(Error::from)
    };
    let header = next_line()?;
    if header.trim() != "kruskal v1" {
        return Err(Error::Parse(format!("bad header {:?}", header)));
    }
    let dims = parse_dims_line(&next_line()?)?;
    let rank_line = next_line()?;
    let rank = parse_usize(
        rank_line
            .trim()
            .strip_prefix("rank:")
            .ok_or_else(|| Error::Parse(format!("bad rank line {:?}", rank_line)))?
            .trim(),
    )?;
    if rank == 0 {
        return Err(Error::Parse("rank must be positive".into()));
    }
    let mut line = next_line()?;
    let weights = if let Some(rest) = line.trim().strip_prefix("weights:") {
        let ws: Result<Vec<f64>> = rest.split_whitespace().map(parse_float).collect();
        let ws = ws?;
        if ws.len() != rank {
            return Err(Error::Parse(format!(
                "expected {} weights, found {}",
                rank,
                ws.len()
            )));
        }
        line = next_line()?;
        Some(ws)
    } else {
        None
    };
    let mut factors = Vec::with_capacity(dims.len());
    for (n, &dim) in dims.iter().enumerate() {
        let expect = format!("mode {}", n + 1);
        if line.trim() != expect {
            return Err(Error::Parse(format!(
                "expected {:?}, found {:?}",
                expect, line
            )));
        }
        let mut f = Matrix::zeros(dim, rank);
        for i in 0..dim {
            let row = next_line()?;
            let vals: Result<Vec<f64>> = row.split_whitespace().map(parse_float).collect();
            let vals = vals?;
            if vals.len() != rank {
                return Err(Error::Parse(format!(
                    "mode {} row {} has {} values, expected {}",
                    n + 1,
                    i + 1,
                    vals.len(),
                    rank
                )));
            }
            for (j, v) in vals.into_iter().enumerate() {
                f.set(i, j, v);
            }
        }
        factors.push(f);
        if n + 1 < dims.len() {
            line = next_line()?;
        }
    }
    KruskalTensor::new(factors, weights)
}

pub const TRACE_HEADER: &str = "k,theta,rel_change,inner_iters,rerr,seconds";

pub fn write_trace_csv(w: &mut impl Write, trace: &RunTrace) -> Result<()> {
    writeln!(w, "{}", TRACE_HEADER)?;
    for row in &trace.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.k,
            fmt_float(row.theta),
            fmt_float(row.rel_change),
            row.inner_iters,
            fmt_float(row.rerr),
            fmt_float(row.seconds)
        )?;
    }
    Ok(())
}
