#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Color {
    Red,
    Green,
    Blue,
    ColorCount,
}

static mut COUNTS: [i32; Color::ColorCount as usize] = [0; Color::ColorCount as usize];

fn color_name(c: Color) -> &'static str {
    match c {
        Color::Red => "red",
        Color::Green => "green",
        Color::Blue => "blue",
        _ => "unknown",
    }
}

fn parse_color(ch: u8) -> Color {
    if ch == b'r' {
        return Color::Red;
    }
    if ch == b'g' {
        return Color::Green;
    }
    Color::Blue
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    for word in input.split_whitespace() {
        let c = parse_color(word.as_bytes()[0]);
        unsafe {
            COUNTS[c as usize] += 1;
        }
    }
    for (i, c) in [Color::Red, Color::Green, Color::Blue].into_iter().enumerate() {
        println!("{}: {}", color_name(c), unsafe { COUNTS[i] });
    }
}
