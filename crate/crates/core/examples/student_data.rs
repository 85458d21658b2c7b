//! Prints the synthetic student table: `cargo run --example student_data > data/student-por.csv`.

use causal_ic::student;

fn main() {
    print!("{}", student::generate_csv(student::ROWS, student::SEED));
}
