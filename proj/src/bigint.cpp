#include "whisker/bigint.hpp"

#include "whisker/errors.hpp"

namespace whisker {

BigInt from_bytes_be(ByteView data) {
  BigInt out;
  if (!data.empty()) mpz_import(out.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
  return out;
}

Bytes to_bytes_be(const BigInt& value) {
  if (value < 0) throw Error(Errc::domain, "negative value has no unsigned encoding");
  if (value == 0) return Bytes{0};
  Bytes out((mpz_sizeinbase(value.get_mpz_t(), 2) + 7) / 8);
  std::size_t count = 0;
  mpz_export(out.data(), &count, 1, 1, 1, 0, value.get_mpz_t());
  out.resize(count);
  return out;
}

Bytes to_bytes_be(const BigInt& value, std::size_t width) {
  if (value < 0) throw Error(Errc::domain, "negative value has no unsigned encoding");
  Bytes out(width, 0);
  if (value == 0) return out;
  std::size_t len = (mpz_sizeinbase(value.get_mpz_t(), 2) + 7) / 8;
  if (len > width) throw Error(Errc::domain, "value too wide for fixed encoding");
  std::size_t count = 0;
  mpz_export(out.data() + (width - len), &count, 1, 1, 1, 0, value.get_mpz_t());
  return out;
}

std::size_t bit_length(const BigInt& value) {
  if (value == 0) return 0;
  return mpz_sizeinbase(value.get_mpz_t(), 2);
}

BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

BigInt invert(const BigInt& value, const BigInt& mod) {
  BigInt out;
  if (mpz_invert(out.get_mpz_t(), value.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw Error(Errc::domain, "value is not invertible");
  }
  return out;
}

std::string to_hex(const BigInt& value) { return value.get_str(16); }

BigInt bigint_from_hex(const std::string& hex) {
  BigInt out;
  if (hex.empty() || out.set_str(hex, 16) != 0 || out < 0) throw Error(Errc::malformed, "invalid hex integer");
  return out;
}

}  // namespace whisker
