#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "scgnet/dataset.hpp"
#include "scgnet/rng.hpp"

namespace scgnet::synth {

/// Line 1 of the published KDDTrain+ file.
inline constexpr const char* kKddTrainLine1 =
    "0,tcp,ftp_data,SF,491,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,2,2,0.00,0.00,0.00,0.00,1.00,0.00,0.00,150,25,0.17,0.03,0.17,"
    "0.00,0.00,0.00,0.05,0.00,normal,20";

inline const std::vector<std::string>& protocols() {
  static const std::vector<std::string> v{"tcp", "udp", "icmp"};
  return v;
}

/// The 70 service values of KDDTrain+.
inline const std::vector<std::string>& services() {
  static const std::vector<std::string> v{
      "aol",      "auth",        "bgp",       "courier",     "csnet_ns",    "ctf",       "daytime",   "discard",
      "domain",   "domain_u",    "echo",      "eco_i",       "ecr_i",       "efs",       "exec",      "finger",
      "ftp",      "ftp_data",    "gopher",    "harvest",     "hostnames",   "http",      "http_2784", "http_443",
      "http_8001", "imap4",      "IRC",       "iso_tsap",    "klogin",      "kshell",    "ldap",      "link",
      "login",    "mtp",         "name",      "netbios_dgm", "netbios_ns",  "netbios_ssn", "netstat", "nnsp",
      "nntp",     "ntp_u",       "other",     "pm_dump",     "pop_2",       "pop_3",     "printer",   "private",
      "red_i",    "remote_job",  "rje",       "shell",       "smtp",        "sql_net",   "ssh",       "sunrpc",
      "supdup",   "systat",      "telnet",    "tftp_u",      "tim_i",       "time",      "urh_i",     "urp_i",
      "uucp",     "uucp_path",   "vmnet",     "whois",       "X11",         "Z39_50"};
  return v;
}

inline const std::vector<std::string>& flags() {
  static const std::vector<std::string> v{"OTH", "REJ", "RSTO", "RSTOS0", "RSTR", "S0", "S1", "S2", "S3", "SF", "SH"};
  return v;
}

/// Subclasses per class as they occur in KDDTrain+, and the extra ones that
/// occur only in KDDTest+.
inline const std::array<std::vector<std::string>, data::kNumClasses>& train_subclasses() {
  static const std::array<std::vector<std::string>, data::kNumClasses> v{{
      {"normal"},
      {"back", "land", "neptune", "pod", "smurf", "teardrop"},
      {"ipsweep", "nmap", "portsweep", "satan"},
      {"ftp_write", "guess_passwd", "imap", "multihop", "phf", "spy", "warezclient", "warezmaster"},
      {"buffer_overflow", "loadmodule", "perl", "rootkit"},
  }};
  return v;
}

inline const std::array<std::vector<std::string>, data::kNumClasses>& test_only_subclasses() {
  static const std::array<std::vector<std::string>, data::kNumClasses> v{{
      {},
      {"apache2", "mailbomb", "processtable", "udpstorm"},
      {"mscan", "saint"},
      {"named", "sendmail", "snmpgetattack", "snmpguess", "xlock", "xsnoop", "worm"},
      {"httptunnel", "ps", "sqlattack", "xterm"},
  }};
  return v;
}

struct Options {
  std::size_t rows = 500;
  std::uint64_t seed = 1;
  /// Class proportions (Normal, DoS, Probe, R2L, U2R).
  std::array<double, data::kNumClasses> mix{0.52, 0.34, 0.09, 0.04, 0.01};
  /// Minimum rows per class, taken before the proportional draw.
  std::size_t min_per_class = 6;
  /// Start with the published KDDTrain+ line 1.
  bool first_line_kdd = true;
  /// Cycle through every protocol, service and flag in the first rows.
  bool cover_categories = true;
  /// Draw a share of attack subclasses from the test-only lists.
  double test_only_fraction = 0.0;
};

namespace detail {

inline std::string fmt_rate(double v) {
  v = std::clamp(v, 0.0, 1.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_int(double v) { return std::to_string(static_cast<long long>(std::llround(std::max(0.0, v)))); }

inline const char* pick_service(data::ClassLabel c, Rng& rng) {
  static const std::array<std::vector<const char*>, data::kNumClasses> pool{{
      {"http", "smtp", "ftp_data", "domain_u", "private", "other", "telnet", "ftp", "ecr_i", "urp_i"},
      {"private", "http", "ecr_i", "other", "telnet", "finger", "smtp", "ftp_data"},
      {"private", "eco_i", "other", "ecr_i", "http", "telnet", "ftp_data"},
      {"ftp_data", "ftp", "telnet", "imap4", "login", "http", "pop_3"},
      {"telnet", "ftp_data", "ftp", "login", "other"},
  }};
  const auto& p = pool[static_cast<std::size_t>(c)];
  return p[rng.below(p.size())];
}

inline const char* pick_flag(data::ClassLabel c, Rng& rng) {
  const double u = rng.uniform();
  switch (c) {
    case data::ClassLabel::Normal: return u < 0.9 ? "SF" : (u < 0.95 ? "REJ" : "S1");
    case data::ClassLabel::DoS: return u < 0.6 ? "S0" : (u < 0.8 ? "SF" : (u < 0.92 ? "REJ" : "RSTO"));
    case data::ClassLabel::Probe: return u < 0.4 ? "SF" : (u < 0.7 ? "REJ" : (u < 0.85 ? "RSTR" : "SH"));
    case data::ClassLabel::R2L: return u < 0.85 ? "SF" : (u < 0.95 ? "RSTO" : "S3");
    case data::ClassLabel::U2R: return u < 0.9 ? "SF" : "S1";
  }
  return "SF";
}

inline const char* pick_protocol(data::ClassLabel c, const std::string& service, Rng& rng) {
  if (service == "ecr_i" || service == "eco_i" || service == "urp_i" || service == "tim_i" ||
      service == "red_i" || service == "urh_i") {
    return "icmp";
  }
  if (service == "domain_u" || service == "ntp_u" || service == "tftp_u") return "udp";
  const double u = rng.uniform();
  if (c == data::ClassLabel::Normal) return u < 0.8 ? "tcp" : "udp";
  return u < 0.9 ? "tcp" : "udp";
}

/// The 38 numeric feature fields (positions other than 1, 2, 3) for a row
/// of class `c`, in file order.
inline std::vector<std::string> numeric_fields(data::ClassLabel c, Rng& rng) {
  using data::ClassLabel;
  auto lognormal = [&](double mu, double s) { return std::exp(mu + s * rng.normal()); };
  auto noisy = [&](double m, double s) { return m + s * rng.normal(); };
  std::vector<std::string> f;
  const bool normal = c == ClassLabel::Normal, dos = c == ClassLabel::DoS, probe = c == ClassLabel::Probe,
             r2l = c == ClassLabel::R2L, u2r = c == ClassLabel::U2R;
  const double duration = (r2l || u2r) ? lognormal(4.0, 1.5) : (rng.uniform() < 0.9 ? 0.0 : lognormal(3.0, 2.0));
  const double src = dos ? (rng.uniform() < 0.7 ? 0.0 : lognormal(6.5, 1.0))
                         : probe ? lognormal(1.5, 1.0) : lognormal(normal ? 5.5 : 6.5, 1.2);
  const double dst = normal ? lognormal(7.0, 1.5) : (r2l || u2r) ? lognormal(7.5, 1.8) : 0.0;
  f.push_back(fmt_int(duration));                                   // 0 duration
  f.push_back(fmt_int(src));                                        // 4 src_bytes
  f.push_back(fmt_int(dst));                                        // 5 dst_bytes
  f.push_back(dos && rng.uniform() < 0.02 ? "1" : "0");             // 6 land
  f.push_back(dos && rng.uniform() < 0.1 ? fmt_int(1 + rng.below(3)) : "0");  // 7 wrong_fragment
  f.push_back(u2r && rng.uniform() < 0.2 ? "1" : "0");              // 8 urgent
  f.push_back(fmt_int((r2l || u2r) ? lognormal(1.0, 0.8) : (normal && rng.uniform() < 0.1 ? 1.0 : 0.0)));  // 9 hot
  f.push_back(r2l && rng.uniform() < 0.3 ? fmt_int(1 + rng.below(4)) : "0");  // 10 num_failed_logins
  f.push_back((normal || r2l || u2r) && rng.uniform() < 0.8 ? "1" : "0");     // 11 logged_in
  f.push_back(u2r ? fmt_int(rng.below(4)) : "0");                   // 12 num_compromised
  f.push_back(u2r && rng.uniform() < 0.6 ? "1" : "0");              // 13 root_shell
  f.push_back(u2r && rng.uniform() < 0.1 ? "1" : "0");              // 14 su_attempted
  f.push_back(u2r ? fmt_int(rng.below(6)) : "0");                   // 15 num_root
  f.push_back((u2r || r2l) ? fmt_int(rng.below(3)) : "0");          // 16 num_file_creations
  f.push_back(u2r && rng.uniform() < 0.3 ? "1" : "0");              // 17 num_shells
  f.push_back((u2r || r2l) && rng.uniform() < 0.3 ? "1" : "0");     // 18 num_access_files
  f.push_back("0");                                                 // 19 num_outbound_cmds
  f.push_back("0");                                                 // 20 is_host_login
  f.push_back(r2l && rng.uniform() < 0.4 ? "1" : "0");              // 21 is_guest_login
  const double count = dos ? noisy(180, 80) : probe ? noisy(60, 60) : noisy(6, 6);
  const double srv = dos ? noisy(15, 10) : probe ? noisy(3, 3) : noisy(8, 8);
  f.push_back(fmt_int(std::min(511.0, count)));                     // 22 count
  f.push_back(fmt_int(std::min(511.0, srv)));                       // 23 srv_count
  const double serror = dos ? noisy(0.75, 0.3) : noisy(0.02, 0.05);
  const double rerror = probe ? noisy(0.5, 0.35) : noisy(0.05, 0.1);
  f.push_back(fmt_rate(serror));                                    // 24 serror_rate
  f.push_back(fmt_rate(serror + noisy(0, 0.03)));                   // 25 srv_serror_rate
  f.push_back(fmt_rate(rerror));                                    // 26 rerror_rate
  f.push_back(fmt_rate(rerror + noisy(0, 0.03)));                   // 27 srv_rerror_rate
  const double same = dos ? noisy(0.08, 0.1) : probe ? noisy(0.3, 0.3) : noisy(0.95, 0.1);
  f.push_back(fmt_rate(same));                                      // 28 same_srv_rate
  f.push_back(fmt_rate(probe ? noisy(0.5, 0.3) : noisy(0.05, 0.05)));  // 29 diff_srv_rate
  f.push_back(fmt_rate(noisy(normal ? 0.1 : 0.05, 0.1)));           // 30 srv_diff_host_rate
  f.push_back(fmt_int(std::min(255.0, dos ? noisy(250, 20) : noisy(120, 90))));  // 31 dst_host_count
  f.push_back(fmt_int(std::min(255.0, normal ? noisy(200, 60) : noisy(20, 20))));  // 32 dst_host_srv_count
  f.push_back(fmt_rate(normal ? noisy(0.85, 0.2) : noisy(0.1, 0.15)));  // 33 dst_host_same_srv_rate
  f.push_back(fmt_rate(probe ? noisy(0.6, 0.3) : noisy(0.05, 0.05)));  // 34 dst_host_diff_srv_rate
  f.push_back(fmt_rate(probe ? noisy(0.7, 0.3) : noisy(0.1, 0.2)));    // 35 dst_host_same_src_port_rate
  f.push_back(fmt_rate(noisy(u2r || r2l ? 0.1 : 0.02, 0.05)));      // 36 dst_host_srv_diff_host_rate
  f.push_back(fmt_rate(dos ? noisy(0.75, 0.3) : noisy(0.02, 0.05)));   // 37 dst_host_serror_rate
  f.push_back(fmt_rate(dos ? noisy(0.7, 0.3) : noisy(0.02, 0.05)));    // 38 dst_host_srv_serror_rate
  f.push_back(fmt_rate(probe ? noisy(0.5, 0.35) : noisy(0.05, 0.1)));  // 39 dst_host_rerror_rate
  f.push_back(fmt_rate(probe ? noisy(0.45, 0.35) : noisy(0.05, 0.1))); // 40 dst_host_srv_rerror_rate
  return f;
}

inline std::string assemble(const std::vector<std::string>& numeric, const std::string& protocol,
                            const std::string& service, const std::string& flag, const std::string& subclass,
                            int difficulty) {
  std::string line = numeric[0] + "," + protocol + "," + service + "," + flag;
  for (std::size_t i = 1; i < numeric.size(); ++i) line += "," + numeric[i];
  return line + "," + subclass + "," + std::to_string(difficulty);
}

}  // namespace detail

/// Deterministic NSL-KDD-format record text (one record per line, no
/// header). Classes are drawn from `mix` after `min_per_class` rows of each;
/// feature distributions differ by class so models can learn something.
/// The rows are synthetic and only share the file layout with NSL-KDD.
inline std::vector<std::string> generate_lines(const Options& opt) {
  Rng rng(opt.seed);
  std::vector<data::ClassLabel> classes;
  for (std::size_t k = 0; k < data::kNumClasses; ++k)
    for (std::size_t i = 0; i < opt.min_per_class; ++i) classes.push_back(static_cast<data::ClassLabel>(k));
  double total = 0.0;
  for (double m : opt.mix) total += m;
  while (classes.size() < opt.rows) {
    double u = rng.uniform() * total;
    std::size_t k = 0;
    while (k + 1 < data::kNumClasses && u >= opt.mix[k]) u -= opt.mix[k++];
    classes.push_back(static_cast<data::ClassLabel>(k));
  }
  classes.resize(opt.rows);
  rng.shuffle(classes);
  std::vector<std::string> lines;
  lines.reserve(opt.rows);
  for (std::size_t i = 0; i < opt.rows; ++i) {
    if (i == 0 && opt.first_line_kdd) {
      lines.emplace_back(kKddTrainLine1);
      continue;
    }
    const auto c = classes[i];
    const auto k = static_cast<std::size_t>(c);
    std::string service = detail::pick_service(c, rng);
    std::string flag = detail::pick_flag(c, rng);
    std::string protocol = detail::pick_protocol(c, service, rng);
    if (opt.cover_categories) {
      const std::size_t j = opt.first_line_kdd ? i - 1 : i;
      if (j < services().size()) service = services()[j];
      if (j < flags().size()) flag = flags()[j];
      if (j < protocols().size()) protocol = protocols()[j];
    }
    const auto& extra = test_only_subclasses()[k];
    const auto& known = train_subclasses()[k];
    const bool novel = !extra.empty() && rng.uniform() < opt.test_only_fraction;
    const auto& pool = novel ? extra : known;
    const std::string subclass = pool[rng.below(pool.size())];
    const int difficulty = static_cast<int>(c == data::ClassLabel::Normal ? 15 + rng.below(7) : rng.below(22));
    lines.push_back(detail::assemble(detail::numeric_fields(c, rng), protocol, service, flag, subclass, difficulty));
  }
  return lines;
}

inline std::string generate_text(const Options& opt) {
  std::string s;
  for (const auto& l : generate_lines(opt)) s += l + "\n";
  return s;
}

}  // namespace scgnet::synth
