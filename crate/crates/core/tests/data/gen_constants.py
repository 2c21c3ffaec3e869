# Regenerates constants.txt: log p and atan(b/a) to 330 decimals with mpmath.
from mpmath import mp, log, atan, mpf, nstr

mp.dps = 360


def is_prime(q):
    return q > 1 and all(q % d for d in range(2, int(q ** 0.5) + 1))


def primes(k):
    out, q = [], 2
    while len(out) < k:
        if is_prime(q):
            out.append(q)
        q += 1
    return out


def gaussian(k):
    out, q = [], 2
    while len(out) < k:
        if is_prime(q) and (q == 2 or q % 4 == 1):
            b = 1
            while 2 * b * b <= q:
                a = int((q - b * b) ** 0.5 + 0.5)
                if a * a + b * b == q:
                    out.append((a, b))
                    break
                b += 1
        q += 1
    return out


def fixed(v):
    return nstr(v, 330, strip_zeros=False, min_fixed=-10, max_fixed=10)


with open("constants.txt", "w") as f:
    f.write("# kind arg value\n")
    for p in primes(25):
        f.write(f"log {p} {fixed(log(p))}\n")
    for a, b in gaussian(22):
        f.write(f"atan {a}/{b} {fixed(atan(mpf(b) / a))}\n")
