// Store embeddings in a binary sidecar and reference them from the
// samples file by row.

use std::error::Error;
use std::fs;

use thrust_gate::datastore::{load_samples, read_sidecar, write_sidecar};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = std::env::temp_dir().join(format!("thrust-gate-sidecar-{}", std::process::id()));
    fs::create_dir_all(&dir)?;

    let rows = vec![vec![0.25, -1.0, 2.5], vec![1.0, 1.0, 0.0], vec![-3.0, 0.5, 0.125]];
    write_sidecar(dir.join("embeddings.bin"), 3, &rows)?;
    let sidecar = read_sidecar(dir.join("embeddings.bin"))?;
    println!("sidecar holds {} rows of dimension {}", sidecar.len(), sidecar.dim);

    let lines: Vec<String> = (0..rows.len())
        .map(|i| {
            let split = if i < 2 { "calibration" } else { "test" };
            format!(r#"{{"id":"q{i}","label":"a","split":"{split}","embedding_ref":{{"path":"embeddings.bin","row":{i}}}}}"#)
        })
        .collect();
    fs::write(dir.join("task.jsonl"), lines.join("\n") + "\n")?;

    let set = load_samples(dir.join("task.jsonl"))?;
    for s in set.samples() {
        println!("{} {:?}", s.id, s.embedding);
    }
    assert_eq!(set.samples()[2].embedding, rows[2]);

    fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
