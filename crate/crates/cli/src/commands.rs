use std::io::Write;
use std::path::Path;

use healthchain_core::demo::{run_demo, DemoConfig, DemoError};
use healthchain_core::network::chain_files;
use healthchain_core::sim::{capacity_grid, sweep, ChainPreset};
use healthchain_core::{Chain, NetworkError, StoreError};

use crate::args::{CapacityArgs, DemoArgs, SweepArgs, VerifyArgs};
use crate::error::CliError;

fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn write_rows(out: Option<&Path>, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let target = || out.map_or_else(|| "stdout".into(), Path::to_path_buf);
    let mut w = csv_writer(out)?;
    w.write_record(header)
        .map_err(|e| CliError::io(target(), e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::io(target(), e))?;
    }
    w.flush().map_err(|e| CliError::io(target(), e))
}

pub fn sweep_cmd(a: &SweepArgs) -> Result<(), CliError> {
    if !(a.lambda_day.is_finite() && a.lambda_day > 0.0) {
        return Err(CliError::usage("--lambda-day must be positive"));
    }
    if a.horizon == 0 {
        return Err(CliError::usage("--horizon must be positive"));
    }
    let rows = sweep(a.lambda_day, &a.mu, a.horizon, a.seed)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let header = [
        "seal_rate_tps",
        "expected_unsealed",
        "simulated_unsealed",
        "seed",
    ]
    .map(String::from);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.mu_tps.to_string(),
                r.expected.to_string(),
                r.simulated.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    write_rows(a.out.as_deref(), &header, &body)
}

fn parse_chain(token: &str, cardano_tps: f64) -> Result<ChainPreset, CliError> {
    let token = token.trim();
    if let Some((name, tps)) = token.split_once(':') {
        let mu: f64 = tps
            .parse()
            .map_err(|_| CliError::usage(format!("bad rate in chain `{token}`")))?;
        if !(mu.is_finite() && mu > 0.0) || name.is_empty() {
            return Err(CliError::usage(format!(
                "chain `{token}` needs a name and a positive rate"
            )));
        }
        return Ok(ChainPreset::new(name, mu));
    }
    ChainPreset::named(token, cardano_tps).ok_or_else(|| {
        CliError::usage(format!(
            "unknown chain `{token}`; use bitcoin, ethereum, iota, cardano or name:tps"
        ))
    })
}

pub fn capacity_cmd(a: &CapacityArgs) -> Result<(), CliError> {
    if !(a.rate_per_patient.is_finite() && a.rate_per_patient > 0.0) {
        return Err(CliError::usage("--rate-per-patient must be positive"));
    }
    if !(a.cardano_tps.is_finite() && a.cardano_tps > 0.0) {
        return Err(CliError::usage("--cardano-tps must be positive"));
    }
    if a.patients.is_empty() || a.patients.contains(&0) {
        return Err(CliError::usage(
            "--patients needs one or more positive counts",
        ));
    }
    let chains = a
        .chains
        .iter()
        .map(|c| parse_chain(c, a.cardano_tps))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = capacity_grid(&a.patients, &chains, a.rate_per_patient);

    let mut header = vec!["patients".to_string()];
    header.extend(chains.iter().map(|c| c.name.clone()));
    let rows: Vec<Vec<String>> = a
        .patients
        .iter()
        .zip(&grid)
        .map(|(n, row)| {
            std::iter::once(n.to_string())
                .chain(row.iter().map(u64::to_string))
                .collect()
        })
        .collect();

    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut stdout = std::io::stdout().lock();
    let mut print = |s: String| writeln!(stdout, "{s}").map_err(|e| CliError::io("stdout", e));
    print(line(&header))?;
    for r in &rows {
        print(line(r))?;
    }
    if let Some(out) = &a.out {
        write_rows(Some(out), &header, &rows)?;
    }
    Ok(())
}

fn network_error(e: NetworkError) -> CliError {
    match e {
        NetworkError::Store(StoreError::Io { path, source }) => CliError::io(path, source),
        other => CliError::Invariant(other.to_string()),
    }
}

pub fn demo_cmd(a: &DemoArgs) -> Result<(), CliError> {
    let cfg = DemoConfig {
        hospitals: a.hospitals,
        patients: a.patients,
        txs: a.txs,
        seed: a.seed,
        txs_per_slot: a.txs_per_slot,
        scheme: a.scheme.into(),
        out_dir: a.out.clone(),
    };
    let outcome = run_demo(&cfg).map_err(|e| match e {
        DemoError::InvalidConfig(m) => CliError::usage(m),
        DemoError::Network(n) => network_error(n),
    })?;
    print!("{}", outcome.report);
    if let Some(dir) = &a.out {
        std::fs::write(dir.join("report.txt"), &outcome.report)
            .map_err(|e| CliError::io(dir, e))?;
    }
    if outcome.passed() {
        Ok(())
    } else {
        let failed: Vec<_> = outcome
            .checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name)
            .collect();
        Err(CliError::Invariant(failed.join(", ")))
    }
}

pub fn verify_cmd(a: &VerifyArgs) -> Result<(), CliError> {
    let path = &a.path;
    let meta = std::fs::metadata(path).map_err(|e| CliError::io(path, e))?;
    let files = if meta.is_dir() {
        chain_files(path).map_err(|e| CliError::io(path, e))?
    } else {
        vec![path.clone()]
    };
    let mut bad = Vec::new();
    let mut stdout = std::io::stdout().lock();
    let mut say = |s: String| writeln!(stdout, "{s}").map_err(|e| CliError::io("stdout", e));
    if files.is_empty() {
        say(format!("no chain files in {}", path.display()))?;
    }
    for file in &files {
        let name = file.display();
        match Chain::read_file(file) {
            Ok(chain) => {
                let report = chain.verify();
                if report.is_ok() {
                    say(format!(
                        "ok    {name}  chain {}  blocks {}",
                        chain.chain_id, report.blocks_checked
                    ))?;
                }
                for v in &report.violations {
                    say(format!(
                        "FAIL  {name}  chain {}  block {}: {}",
                        chain.chain_id, v.index, v.error
                    ))?;
                    bad.push(format!("{} block {}", chain.chain_id, v.index));
                }
            }
            Err(StoreError::CorruptRecord { line, reason, .. }) => {
                let at = match line {
                    0 | 1 => "header".to_string(),
                    n => format!("block {}", n - 2),
                };
                say(format!("FAIL  {name}  {at} (line {line}): {reason}"))?;
                bad.push(format!("{name} {at}"));
            }
            Err(StoreError::Io { path, source }) => return Err(CliError::io(path, source)),
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(bad.join("; ")))
    }
}
