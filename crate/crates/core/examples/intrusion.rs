//! Word-intrusion questions with the answer shown.

use sparse_interp::eval_interpret::{check_question, generate_intrusion_questions};
use sparse_interp::synthetic::gaussian_embedding;
use sparse_interp::SeededRng;

fn main() -> sparse_interp::Result<()> {
    let emb = gaussian_embedding(100, 8, &mut SeededRng::new(7));
    let questions = generate_intrusion_questions(&emb, 5, &mut SeededRng::new(42))?;
    for q in &questions {
        check_question(&emb, q)?;
        println!(
            "{}  (intruder {} from dimension {}, source dimension {})",
            q.words.join(" "),
            q.words[q.intruder],
            q.home_dim,
            q.source_dim
        );
    }
    Ok(())
}
