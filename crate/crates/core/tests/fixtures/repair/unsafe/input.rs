static mut COUNTER: i32 = 0;

fn bump() {
    COUNTER += 1;
}

fn main() {
    bump();
    bump();
    let c = COUNTER;
    println!("{}", c);
}
