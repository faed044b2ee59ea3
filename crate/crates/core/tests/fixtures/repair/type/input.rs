fn twice(a: i64) -> i64 {
    2 * a
}

fn main() {
    let x: i32 = 5;
    let y: i64 = twice(x);
    let r: f64 = 2;
    let s: i64 = y + x;
    println!("{} {:.6}", s, r);
}
