/* Toy byte scaler. The conditional expressions below compile into several
 * basic blocks at -O0 and collapse into branchless code at -O3, which is
 * exactly the shape the pairing stage has to bridge. */

static inline __attribute__((always_inline)) int clamp255(int v) {
    return v > 255 ? 255 : v;
}

static int mix(int a, int b) {
    return (a ^ b) + ((a & 0xf) << 1);
}

int scale_byte(int v, int k) {
    int s = v * k + mix(v, k);
    return clamp255(s);
}

int pick(int a, int b) {
    return a > b ? a - b : b - a;
}

int main(int argc, char **argv) {
    (void)argv;
    int x = argc * 3;
    int y = scale_byte(x, 7);
    return pick(x, y) & 0x7f;
}
