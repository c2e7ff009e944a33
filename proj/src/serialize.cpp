#include "steinrec/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "steinrec/error.hpp"

namespace steinrec {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

double parse_real(const std::string& tok) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw Error(Errc::parse, "bad number '" + tok + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& tok) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error(Errc::parse, "bad integer '" + tok + "'");
  return v;
}

std::vector<std::string> next_tokens(std::istream& is, const char* what) {
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::vector<std::string> toks;
    for (std::string t; ss >> t;) toks.push_back(t);
    if (!toks.empty()) return toks;
  }
  throw Error(Errc::parse, std::string("unexpected end of input reading ") + what);
}

void expect_count(const std::vector<std::string>& toks, std::size_t n) {
  if (toks.size() != n) throw Error(Errc::parse, "expected " + std::to_string(n) + " fields");
}

}  // namespace

void write_law(std::ostream& os, const Law& law) {
  std::visit(
      [&os](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DiscreteDistribution>) {
          os << "discrete " << l.size() << '\n';
          for (std::size_t i = 0; i < l.size(); ++i)
            os << format_real(l.atoms()[i]) << ' ' << format_real(l.probs()[i]) << '\n';
        } else if constexpr (std::is_same_v<T, PiecewiseLinearCDF>) {
          os << "piecewise_linear " << l.breakpoints().size() << '\n';
          for (std::size_t i = 0; i < l.breakpoints().size(); ++i)
            os << format_real(l.breakpoints()[i]) << ' ' << format_real(l.cdf_values()[i]) << '\n';
        } else if constexpr (std::is_same_v<T, EmpiricalSample>) {
          os << "empirical " << l.size() << ' ' << l.provenance().master_seed << ' '
             << l.provenance().stream << '\n';
          for (double v : l.values()) os << format_real(v) << '\n';
        } else {
          os << "normal 0\n";
        }
      },
      law);
}

Law read_law(std::istream& is) {
  const auto header = next_tokens(is, "law header");
  const std::string& kind = header[0];
  if (kind == "normal") {
    expect_count(header, 2);
    return StandardNormal{};
  }
  if (header.size() < 2) throw Error(Errc::parse, "missing record size");
  const std::size_t n = parse_u64(header[1]);
  if (kind == "discrete" || kind == "piecewise_linear") {
    expect_count(header, 2);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto toks = next_tokens(is, "law row");
      expect_count(toks, 2);
      a[i] = parse_real(toks[0]);
      b[i] = parse_real(toks[1]);
    }
    if (kind == "discrete") return DiscreteDistribution(std::move(a), std::move(b));
    return PiecewiseLinearCDF(std::move(a), std::move(b));
  }
  if (kind == "empirical") {
    expect_count(header, 4);
    SeedProvenance prov{parse_u64(header[2]), parse_u64(header[3])};
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto toks = next_tokens(is, "sample row");
      expect_count(toks, 1);
      v[i] = parse_real(toks[0]);
    }
    return EmpiricalSample(std::move(v), prov);
  }
  throw Error(Errc::parse, "unknown law kind '" + kind + "'");
}

std::string to_record(const Law& law) {
  std::ostringstream os;
  write_law(os, law);
  return os.str();
}

Law from_record(std::string_view text) {
  std::istringstream is{std::string(text)};
  return read_law(is);
}

}  // namespace steinrec
