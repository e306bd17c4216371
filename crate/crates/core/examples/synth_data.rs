use hybridcast::datapipe::{synth_generate, write_frame_file, TARGET};

fn main() -> hybridcast::Result<()> {
    let hours: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let frame = synth_generate(hours, 1)?;
    let pm = frame.column(TARGET)?;
    let mean = pm.iter().sum::<f64>() / pm.len() as f64;
    let max = pm.iter().cloned().fold(f64::MIN, f64::max);
    println!("{hours} hours, {TARGET} mean {mean:.1}, max {max:.1}");

    let out = std::env::temp_dir().join("hybridcast_synth.csv");
    write_frame_file(&frame, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
