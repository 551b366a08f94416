//! Trajectory logs as CSV.
//!
//! Header: `t,x1..xn,z1..zn,u,theta_hat1..theta_hatq,rho_hat,beta,
//! funnel_bound,kappa,lyapunov,funnel_margin`. Values are written in
//! shortest round-trip form, so reading a file back gives the log exactly.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use funnelback_core::sim::LogRow;
use funnelback_core::TrajectoryLog;

const TAIL: [&str; 5] = ["beta", "funnel_bound", "kappa", "lyapunov", "funnel_margin"];

pub fn header(n: usize, q: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=n).map(|i| format!("z{i}")));
    h.push("u".into());
    h.extend((1..=q).map(|i| format!("theta_hat{i}")));
    h.push("rho_hat".into());
    h.extend(TAIL.iter().map(|s| s.to_string()));
    h
}

pub fn write<W: Write>(log: &TrajectoryLog, n: usize, q: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n, q))?;
    for r in &log.rows {
        let mut rec: Vec<String> = Vec::with_capacity(2 * n + q + 8);
        rec.push(r.t.to_string());
        rec.extend(r.x.iter().map(f64::to_string));
        rec.extend(r.z.iter().map(f64::to_string));
        rec.push(r.u.to_string());
        rec.extend(r.theta_hat.iter().map(f64::to_string));
        rec.push(r.rho_hat.to_string());
        for v in [r.beta, r.funnel_bound, r.kappa, r.lyapunov, r.funnel_margin] {
            rec.push(v.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a log written by [`write`]; the orders are read off the header.
pub fn read<R: Read>(input: R) -> Result<(TrajectoryLog, usize, usize)> {
    let mut rdr = csv::Reader::from_reader(input);
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let n = head.iter().filter(|h| h.starts_with('x')).count();
    let q = head.iter().filter(|h| h.starts_with("theta_hat")).count();
    if head != header(n, q) {
        bail!("unexpected CSV header: {}", head.join(","));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("row {}", k + 1))?;
        let mut it = v.into_iter();
        let mut take = |m: usize| -> Vec<f64> { it.by_ref().take(m).collect() };
        let t = take(1)[0];
        let x = take(n);
        let z = take(n);
        let u = take(1)[0];
        let theta_hat = take(q);
        let tail = take(6);
        rows.push(LogRow {
            t,
            x,
            z,
            u,
            theta_hat,
            rho_hat: tail[0],
            beta: tail[1],
            funnel_bound: tail[2],
            kappa: tail[3],
            lyapunov: tail[4],
            funnel_margin: tail[5],
        });
    }
    Ok((TrajectoryLog { rows }, n, q))
}
