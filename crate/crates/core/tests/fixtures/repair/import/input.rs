use std::fmt::Write;
use std::fmt::Write;

fn main() {
    let mut counts: HashMap<i32, i32> = HashMap::new();
    counts.insert(0, 1);
    counts.insert(1, 2);
    counts.insert(2, 3);
    let mut out = String::new();
    write!(out, "{}", counts.values().sum::<i32>()).unwrap();
    println!("{}", out);
}
