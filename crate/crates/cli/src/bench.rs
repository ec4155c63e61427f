use anyhow::Result;
use hq_core::experiments::ExperimentRow;

const HEADER: [&str; 8] = ["experiment", "d", "b", "trials", "measured", "reference", "criterion", "pass"];

pub fn to_csv(rows: &[ExperimentRow], timings: bool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = HEADER.to_vec();
    if timings {
        header.push("wall_time_s");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.name.clone(),
            r.d.to_string(),
            r.b.to_string(),
            r.trials.to_string(),
            format!("{:e}", r.measured),
            format!("{:e}", r.reference),
            r.criterion.to_string(),
            r.pass.to_string(),
        ];
        if timings {
            rec.push(format!("{:.3}", r.wall_time.as_secs_f64()));
        }
        w.write_record(&rec)?;
    }
    Ok(w.into_inner()?)
}

pub fn table(rows: &[ExperimentRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(10);
    let mut out =
        format!("{:<width$}  {:>14}  {:>14}  {:<22}  result\n", "experiment", "measured", "reference", "criterion");
    for r in rows {
        out += &format!(
            "{:<width$}  {:>14.6e}  {:>14.6e}  {:<22}  {}\n",
            r.name,
            r.measured,
            r.reference,
            r.criterion.to_string(),
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    out
}
