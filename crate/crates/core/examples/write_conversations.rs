//! Prints `n` synthetic conversations as JSON lines.
//!
//! cargo run -p psyling --example write_conversations -- 50 50 > conversations.jsonl

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let seed = args.next().unwrap_or(50);
    let n = args.next().unwrap_or(50) as usize;
    for c in psyling::adapt::synthetic_conversations(seed, n).expect("generate") {
        println!("{}", serde_json::to_string(&c).expect("serialize"));
    }
}
