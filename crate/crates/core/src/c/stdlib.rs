//! Bundled allowlist of C standard-library identifiers.
//!
//! System headers are never expanded; anything a program pulls from them is
//! resolved against this table so it can be classified as a known external
//! instead of an unresolved reference.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StdKind {
    Type,
    Function,
    Value,
}

pub const STD_HEADERS: &[&str] = &[
    "assert.h", "complex.h", "ctype.h", "errno.h", "fenv.h", "float.h", "inttypes.h", "iso646.h",
    "limits.h", "locale.h", "math.h", "setjmp.h", "signal.h", "stdalign.h", "stdarg.h",
    "stdatomic.h", "stdbool.h", "stddef.h", "stdint.h", "stdio.h", "stdlib.h", "stdnoreturn.h",
    "string.h", "tgmath.h", "threads.h", "time.h", "uchar.h", "wchar.h", "wctype.h", "unistd.h",
    "sys/types.h", "sys/stat.h", "sys/time.h", "fcntl.h", "strings.h", "malloc.h", "memory.h",
    "pthread.h", "search.h", "termios.h", "dirent.h", "getopt.h",
];

macro_rules! table {
    ($($header:literal => [$($kind:ident: $($name:literal),+);+ $(;)?]),+ $(,)?) => {
        &[$($($( ($name, $header, StdKind::$kind), )+)+)+]
    };
}

const TABLE: &[(&str, &str, StdKind)] = table! {
    "stdio.h" => [
        Type: "FILE", "fpos_t";
        Function: "printf", "fprintf", "sprintf", "snprintf", "vprintf", "vfprintf", "vsprintf",
            "vsnprintf", "scanf", "fscanf", "sscanf", "getchar", "putchar", "puts", "fputs",
            "fgets", "gets", "fgetc", "fputc", "getc", "putc", "ungetc", "fopen", "fclose",
            "fread", "fwrite", "fflush", "fseek", "ftell", "rewind", "feof", "ferror",
            "clearerr", "perror", "remove", "rename", "tmpfile", "setbuf", "setvbuf", "getline";
        Value: "stdin", "stdout", "stderr", "EOF", "BUFSIZ", "SEEK_SET", "SEEK_CUR", "SEEK_END",
            "FILENAME_MAX";
    ],
    "stdlib.h" => [
        Type: "div_t", "ldiv_t", "lldiv_t";
        Function: "malloc", "calloc", "realloc", "free", "exit", "abort", "atexit", "atoi",
            "atol", "atoll", "atof", "strtol", "strtoll", "strtoul", "strtoull", "strtod",
            "strtof", "rand", "srand", "qsort", "bsearch", "abs", "labs", "llabs", "div",
            "ldiv", "getenv", "system";
        Value: "EXIT_SUCCESS", "EXIT_FAILURE", "RAND_MAX";
    ],
    "stddef.h" => [
        Type: "size_t", "ptrdiff_t", "wchar_t", "max_align_t";
        Value: "NULL";
        Function: "offsetof";
    ],
    "stdint.h" => [
        Type: "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t",
            "uint64_t", "intptr_t", "uintptr_t", "intmax_t", "uintmax_t", "int_least8_t",
            "int_least16_t", "int_least32_t", "int_least64_t", "uint_least8_t",
            "uint_least16_t", "uint_least32_t", "uint_least64_t", "int_fast8_t",
            "int_fast16_t", "int_fast32_t", "int_fast64_t", "uint_fast8_t", "uint_fast16_t",
            "uint_fast32_t", "uint_fast64_t";
        Value: "INT8_MAX", "INT16_MAX", "INT32_MAX", "INT64_MAX", "INT8_MIN", "INT16_MIN",
            "INT32_MIN", "INT64_MIN", "UINT8_MAX", "UINT16_MAX", "UINT32_MAX", "UINT64_MAX",
            "SIZE_MAX", "INTPTR_MAX";
    ],
    "inttypes.h" => [
        Value: "PRId32", "PRId64", "PRIu32", "PRIu64", "PRIx32", "PRIx64", "SCNd32", "SCNd64";
    ],
    "stdbool.h" => [
        Type: "bool";
        Value: "true", "false";
    ],
    "string.h" => [
        Function: "strlen", "strcpy", "strncpy", "strcat", "strncat", "strcmp", "strncmp",
            "strchr", "strrchr", "strstr", "strtok", "strdup", "strndup", "memcpy", "memmove",
            "memset", "memcmp", "memchr", "strspn", "strcspn", "strpbrk", "strerror";
    ],
    "strings.h" => [
        Function: "strcasecmp", "strncasecmp", "bzero";
    ],
    "ctype.h" => [
        Function: "isalpha", "isdigit", "isalnum", "isspace", "isupper", "islower", "ispunct",
            "isprint", "isxdigit", "iscntrl", "isgraph", "toupper", "tolower";
    ],
    "math.h" => [
        Function: "sqrt", "pow", "fabs", "floor", "ceil", "round", "trunc", "fmod", "exp",
            "log", "log10", "log2", "sin", "cos", "tan", "asin", "acos", "atan", "atan2",
            "sinh", "cosh", "tanh", "hypot", "cbrt", "fmin", "fmax", "sqrtf", "powf", "fabsf",
            "floorf", "ceilf", "roundf", "lround", "llround", "isnan", "isinf";
        Value: "M_PI", "M_E", "INFINITY", "NAN", "HUGE_VAL";
    ],
    "limits.h" => [
        Value: "INT_MAX", "INT_MIN", "UINT_MAX", "LONG_MAX", "LONG_MIN", "ULONG_MAX",
            "LLONG_MAX", "LLONG_MIN", "ULLONG_MAX", "SHRT_MAX", "SHRT_MIN", "USHRT_MAX",
            "CHAR_MAX", "CHAR_MIN", "UCHAR_MAX", "SCHAR_MAX", "SCHAR_MIN", "CHAR_BIT";
    ],
    "float.h" => [
        Value: "DBL_MAX", "DBL_MIN", "DBL_EPSILON", "FLT_MAX", "FLT_MIN", "FLT_EPSILON";
    ],
    "assert.h" => [
        Function: "assert";
    ],
    "stdarg.h" => [
        Type: "va_list";
        Function: "va_start", "va_end", "va_arg", "va_copy";
    ],
    "errno.h" => [
        Value: "errno", "EINVAL", "ENOMEM", "ERANGE", "EDOM";
    ],
    "time.h" => [
        Type: "time_t", "clock_t", "tm";
        Function: "time", "clock", "difftime", "mktime", "localtime", "gmtime", "strftime";
        Value: "CLOCKS_PER_SEC";
    ],
    "signal.h" => [
        Type: "sig_atomic_t";
        Function: "signal", "raise";
    ],
    "setjmp.h" => [
        Type: "jmp_buf";
        Function: "setjmp", "longjmp";
    ],
    "unistd.h" => [
        Type: "ssize_t", "off_t", "pid_t";
        Function: "read", "write", "close", "sleep", "usleep", "getpid";
    ],
    "wchar.h" => [
        Type: "wint_t", "mbstate_t";
    ],
};

/// Header and kind for a standard identifier, if it is in the allowlist.
pub fn lookup(name: &str) -> Option<(&'static str, StdKind)> {
    TABLE
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, h, k)| (*h, *k))
}

pub fn is_std_header(name: &str) -> bool {
    STD_HEADERS.contains(&name)
}

/// Standard typedef names the parser must treat as type names.
pub fn type_names() -> impl Iterator<Item = &'static str> {
    TABLE
        .iter()
        .filter(|(_, _, k)| *k == StdKind::Type)
        .map(|(n, _, _)| *n)
        .chain(["__builtin_va_list", "_Float128", "__int128_t", "__uint128_t"])
}
