#include "dtile/rational.hpp"

namespace dtile {

Rat rat(long num, long den) {
    if (den == 0) throw ValidationError("rational with zero denominator");
    Rat r(num, den);
    r.canonicalize();
    return r;
}

Rat rat_from_string(const std::string& s) {
    Rat r;
    if (r.set_str(s, 10) != 0) throw ValidationError("bad rational literal: '" + s + "'");
    if (r.get_den() == 0) throw ValidationError("rational with zero denominator: '" + s + "'");
    r.canonicalize();
    return r;
}

std::string rat_to_string(const Rat& r) { return r.get_str(); }

Int rat_floor(const Rat& r) {
    Int q;
    mpz_fdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
    return q;
}

Int rat_ceil(const Rat& r) {
    Int q;
    mpz_cdiv_q(q.get_mpz_t(), r.get_num().get_mpz_t(), r.get_den().get_mpz_t());
    return q;
}

std::size_t rat_bits(const Rat& r) {
    std::size_t nb = mpz_sizeinbase(r.get_num().get_mpz_t(), 2);
    std::size_t db = mpz_sizeinbase(r.get_den().get_mpz_t(), 2);
    return nb > db ? nb : db;
}

Rat linf_norm(const Vec2Q& v) {
    Rat ax = abs(v.x), ay = abs(v.y);
    return ax > ay ? ax : ay;
}

Rat AffineMap::linear_inf_norm() const {
    Rat r1 = abs(a11) + abs(a12);
    Rat r2 = abs(a21) + abs(a22);
    return r1 > r2 ? r1 : r2;
}

AffineMap AffineMap::inverse() const {
    Rat det = a11 * a22 - a12 * a21;
    if (det == 0) throw DomainError("affine map is singular");
    Rat i11 = a22 / det, i12 = -a12 / det, i21 = -a21 / det, i22 = a11 / det;
    // inverse(x) = Ainv*(x - b)
    return AffineMap(i11, i12, i21, i22, -(i11 * b1 + i12 * b2), -(i21 * b1 + i22 * b2));
}

Int map_denominator_lcm(const AffineMap& f) {
    Int l = 1;
    for (const Rat* r : {&f.a11, &f.a12, &f.a21, &f.a22, &f.b1, &f.b2}) {
        Int d = r->get_den();
        mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), d.get_mpz_t());
    }
    return l;
}

}  // namespace dtile
