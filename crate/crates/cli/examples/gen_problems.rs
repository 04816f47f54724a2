//! Regenerates the shipped problem files in problems/ from the built-in
//! table. Run from the workspace root:
//! `cargo run -p sl-lab --example gen_problems`

fn main() {
    for name in ["free", "paper-sec5", "paper-sec6.1", "paper-sec6.2"] {
        let file = sl_lab::schema::builtin_file(name).expect("builtin");
        let json = serde_json::to_string_pretty(&file).expect("serialize");
        let path = format!("problems/{}.json", name);
        std::fs::write(&path, json + "\n").expect("write");
        println!("wrote {}", path);
    }
}
