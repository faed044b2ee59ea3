static mut LINES: i64 = 0;
static mut WORDS: i64 = 0;
static mut CHARS: i64 = 0;

fn count(c: u8, in_word: &mut bool) {
    unsafe {
        CHARS += 1;
        if c == b'\n' {
            LINES += 1;
        }
        if matches!(c, b' ' | b'\t' | b'\n' | 0x0b | 0x0c | b'\r') {
            *in_word = false;
        } else if !*in_word {
            *in_word = true;
            WORDS += 1;
        }
    }
}

fn main() {
    let mut buf = Vec::new();
    std::io::Read::read_to_end(&mut std::io::stdin(), &mut buf).unwrap();
    let mut in_word = false;
    for &c in &buf {
        count(c, &mut in_word);
    }
    unsafe {
        println!("{} {} {}", LINES, WORDS, CHARS);
    }
}
