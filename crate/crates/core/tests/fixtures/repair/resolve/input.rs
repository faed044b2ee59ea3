#[derive(Clone, Copy, PartialEq)]
enum Color {
    Red,
    Green,
}

static G_MAX: i32 = 10;

fn main() {
    let c = GREEN;
    println!("{} {}", g_max, (c == RED) as i32);
}
