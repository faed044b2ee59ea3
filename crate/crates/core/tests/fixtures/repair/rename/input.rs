#![allow(non_upper_case_globals)]
static total: i32 = 0;

fn main() {
    let total = 3;
    println!("{}", total);
}
