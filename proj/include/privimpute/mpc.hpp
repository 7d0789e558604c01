#pragma once

#include <array>
#include <chrono>
#include <fstream>

#include "privimpute/net.hpp"

namespace privimpute::mpc {

// ---- Beaver triples ----
//
// local_dealer derives both parties' shares from a session-common seed; it
// models triple distribution and provides no cryptographic security of
// triple generation (documented, test/bench default). Triple files hold
// per-party shares; the header's ring-bits field distinguishes 64-bit
// arithmetic triples (64) from word-packed boolean AND triples (1).

struct TripleFileHeader {
  static constexpr char kMagic[4] = {'P', 'I', 'T', 'R'};
  u32 ring_bits = 64;
  u64 count = 0;
};

inline void write_triple_file(const std::string& path, u32 ring_bits,
                              const std::vector<std::array<u64, 3>>& records, u64 logical_count) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write triple file: " + path);
  Bytes hdr;  // 16 bytes: magic, count, ring bits
  hdr.insert(hdr.end(), TripleFileHeader::kMagic, TripleFileHeader::kMagic + 4);
  put_u64le(hdr, logical_count);
  for (int i = 0; i < 4; i++) hdr.push_back(u8(ring_bits >> (8 * i)));
  out.write(reinterpret_cast<const char*>(hdr.data()), i64(hdr.size()));
  Bytes body;
  for (const auto& r : records) {
    put_u64le(body, r[0]);
    put_u64le(body, r[1]);
    put_u64le(body, r[2]);
  }
  out.write(reinterpret_cast<const char*>(body.data()), i64(body.size()));
}

inline std::pair<TripleFileHeader, std::vector<std::array<u64, 3>>> read_triple_file(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open triple file: " + path);
  char hdr[16];
  if (!in.read(hdr, 16)) throw ParseError("triple file: truncated header");
  if (std::memcmp(hdr, TripleFileHeader::kMagic, 4) != 0)
    throw ParseError("triple file: bad magic");
  TripleFileHeader h;
  h.count = get_u64le(reinterpret_cast<const u8*>(hdr) + 4);
  h.ring_bits = 0;
  for (int i = 0; i < 4; i++) h.ring_bits |= u32(u8(hdr[12 + i])) << (8 * i);
  std::vector<std::array<u64, 3>> records;
  char rec[24];
  while (in.read(rec, 24)) {
    const u8* p = reinterpret_cast<const u8*>(rec);
    records.push_back({get_u64le(p), get_u64le(p + 8), get_u64le(p + 16)});
  }
  return {h, records};
}

// generate matching per-party share files (arith or bool per ring_bits)
inline void generate_triple_files(u64 seed, u32 ring_bits, u64 count, const std::string& path_a,
                                  const std::string& path_b) {
  Rng rng(seed);
  std::vector<std::array<u64, 3>> rec_a, rec_b;
  u64 records = ring_bits == 64 ? count : (count + 63) / 64;
  for (u64 i = 0; i < records; i++) {
    u64 a = rng.next(), b = rng.next();
    u64 c = ring_bits == 64 ? a * b : (a & b);
    u64 a0 = rng.next(), b0 = rng.next(), c0 = rng.next();
    rec_a.push_back({a0, b0, c0});
    if (ring_bits == 64)
      rec_b.push_back({a - a0, b - b0, c - c0});
    else
      rec_b.push_back({a ^ a0, b ^ b0, c ^ c0});
  }
  write_triple_file(path_a, ring_bits, rec_a, count);
  write_triple_file(path_b, ring_bits, rec_b, count);
}

class TripleProvider {
 public:
  enum class Mode { local_dealer, precomputed_file };

  static TripleProvider dealer(int party, u64 common_seed) {
    TripleProvider t;
    t.mode_ = Mode::local_dealer;
    t.party_ = party;
    t.arith_rng_ = Rng(common_seed ^ 0xa17a57a1ULL);
    t.bool_rng_ = Rng(common_seed ^ 0xb001b001ULL);
    return t;
  }
  static TripleProvider from_files(int party, const std::string& arith_path,
                                   const std::string& bool_path) {
    TripleProvider t;
    t.mode_ = Mode::precomputed_file;
    t.party_ = party;
    auto [ha, ra] = read_triple_file(arith_path);
    if (ha.ring_bits != 64) throw ConfigError("expected 64-bit arithmetic triple file");
    auto [hb, rb] = read_triple_file(bool_path);
    if (hb.ring_bits != 1) throw ConfigError("expected packed boolean triple file");
    t.file_arith_ = std::move(ra);
    t.file_bool_ = std::move(rb);
    return t;
  }

  void set_build_clock(net::Channel* ch) { clock_ = ch; }

  std::array<u64, 3> arith_triple() {
    consumed_arith_++;
    if (mode_ == Mode::local_dealer) {
      auto t0 = std::chrono::steady_clock::now();
      u64 a = arith_rng_.next(), b = arith_rng_.next();
      u64 c = a * b;
      u64 a0 = arith_rng_.next(), b0 = arith_rng_.next(), c0 = arith_rng_.next();
      credit_build(t0);
      return party_ == 0 ? std::array<u64, 3>{a0, b0, c0}
                         : std::array<u64, 3>{a - a0, b - b0, c - c0};
    }
    if (arith_cursor_ >= file_arith_.size()) throw Error("arithmetic triples exhausted");
    return file_arith_[arith_cursor_++];
  }

  std::array<u64, 3> bool_word_triple() {
    consumed_bool_words_++;
    if (mode_ == Mode::local_dealer) {
      auto t0 = std::chrono::steady_clock::now();
      u64 a = bool_rng_.next(), b = bool_rng_.next();
      u64 c = a & b;
      u64 a0 = bool_rng_.next(), b0 = bool_rng_.next(), c0 = bool_rng_.next();
      credit_build(t0);
      return party_ == 0 ? std::array<u64, 3>{a0, b0, c0}
                         : std::array<u64, 3>{a ^ a0, b ^ b0, c ^ c0};
    }
    if (bool_cursor_ >= file_bool_.size()) throw Error("boolean triples exhausted");
    return file_bool_[bool_cursor_++];
  }

  u64 consumed_arith() const { return consumed_arith_; }
  u64 consumed_bool_words() const { return consumed_bool_words_; }
  Mode mode() const { return mode_; }

 private:
  void credit_build(std::chrono::steady_clock::time_point t0) {
    if (clock_)
      clock_->add_phase_time(
          "mpc_build", u64(std::chrono::duration_cast<std::chrono::nanoseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count()));
  }
  Mode mode_ = Mode::local_dealer;
  int party_ = 0;
  Rng arith_rng_{0}, bool_rng_{0};
  std::vector<std::array<u64, 3>> file_arith_, file_bool_;
  size_t arith_cursor_ = 0, bool_cursor_ = 0;
  u64 consumed_arith_ = 0, consumed_bool_words_ = 0;
  net::Channel* clock_ = nullptr;
};

// ---- share types ----

// additive shares in Z_2^64
struct AVec {
  std::vector<u64> v;
  size_t size() const { return v.size(); }
};

// XOR-shared bit vector, word-packed
struct BitVec {
  size_t n = 0;
  std::vector<u64> w;

  static BitVec zeros(size_t n) { return {n, std::vector<u64>((n + 63) / 64, 0)}; }
  bool get(size_t i) const { return (w[i / 64] >> (i % 64)) & 1; }
  void set(size_t i, bool b) {
    if (b)
      w[i / 64] |= u64(1) << (i % 64);
    else
      w[i / 64] &= ~(u64(1) << (i % 64));
  }
  size_t packed_bytes() const { return (n + 7) / 8; }
  // exact-byte serialization keeps boolean openings linear in the bit count
  void append_to(Bytes& out) const {
    const u8* p = reinterpret_cast<const u8*>(w.data());
    out.insert(out.end(), p, p + packed_bytes());
  }
  static BitVec read_from(const u8* p, size_t n) {
    BitVec v = zeros(n);
    std::memcpy(v.w.data(), p, v.packed_bytes());
    return v;
  }
};

// bitsliced integers: columns[k] holds bit k of every lane
using BitCols = std::vector<BitVec>;

// bit-granular serialization for gate openings: without it, every 1-lane
// column would cost a padded byte per round and the constant-size division
// circuit would dominate small-session transcripts
struct BitWriter {
  Bytes buf;
  size_t cursor = 0;  // bit position

  void push_word(u64 w, unsigned bits) {
    buf.resize((cursor + bits + 7) / 8, 0);
    unsigned done = 0;
    while (done < bits) {
      size_t pos = cursor + done;
      unsigned take = std::min(bits - done, unsigned(8 - pos % 8));
      u64 chunk = (w >> done) & ((u64(1) << take) - 1);
      buf[pos / 8] |= u8(chunk << (pos % 8));
      done += take;
    }
    cursor += bits;
  }
  void push(const BitVec& v) {
    size_t full = v.n / 64;
    for (size_t i = 0; i < full; i++) push_word(v.w[i], 64);
    if (v.n % 64) push_word(v.w[full], unsigned(v.n % 64));
  }
};

struct BitReader {
  const u8* p;
  size_t size;
  size_t cursor = 0;

  BitReader(const u8* data, size_t n) : p(data), size(n) {}

  u64 read_word(unsigned bits) {
    u64 out = 0;
    unsigned done = 0;
    while (done < bits) {
      size_t pos = cursor + done;
      if (pos / 8 >= size) throw ProtocolError("bit stream truncated");
      unsigned take = std::min(bits - done, unsigned(8 - pos % 8));
      u64 chunk = (u64(p[pos / 8]) >> (pos % 8)) & ((u64(1) << take) - 1);
      out |= chunk << done;
      done += take;
    }
    cursor += bits;
    return out;
  }
  BitVec read(size_t n) {
    BitVec v = BitVec::zeros(n);
    size_t full = n / 64;
    for (size_t i = 0; i < full; i++) v.w[i] = read_word(64);
    if (n % 64) v.w[full] = read_word(unsigned(n % 64));
    return v;
  }
};

// GMW-style two-party engine over XOR/additive shares with dealer triples.
// Every operation is data-independent and runs in lockstep on both parties.
class Engine {
 public:
  Engine(int party, net::Channel& ch, TripleProvider triples, u64 mask_seed)
      : party_(party), ch_(ch), triples_(std::move(triples)), rng_(mask_seed) {
    triples_.set_build_clock(&ch_);
  }

  int party() const { return party_; }
  net::Channel& channel() { return ch_; }
  TripleProvider& triples() { return triples_; }

  // ---- input / open ----

  AVec input_arith(int owner, size_t count, std::span<const u64> vals = {}) {
    AVec out;
    out.v.resize(count);
    if (party_ == owner) {
      if (vals.size() != count) throw Error("input_arith: bad value count");
      Bytes msg;
      msg.reserve(count * 8);
      for (size_t i = 0; i < count; i++) {
        u64 peer = rng_.next();
        out.v[i] = vals[i] - peer;
        put_u64le(msg, peer);
      }
      ch_.send_msg(net::MsgType::share_input, msg);
    } else {
      Bytes msg = ch_.recv_msg(net::MsgType::share_input);
      if (msg.size() != count * 8) throw ProtocolError("input_arith: size mismatch");
      for (size_t i = 0; i < count; i++) out.v[i] = get_u64le(msg.data() + i * 8);
    }
    return out;
  }

  // input whose length only the owner knows; the count rides with the shares
  AVec input_arith_dyn(int owner, std::span<const u64> vals = {}) {
    AVec out;
    if (party_ == owner) {
      Bytes msg;
      put_u32be(msg, u32(vals.size()));
      out.v.resize(vals.size());
      for (size_t i = 0; i < vals.size(); i++) {
        u64 peer = rng_.next();
        out.v[i] = vals[i] - peer;
        put_u64le(msg, peer);
      }
      ch_.send_msg(net::MsgType::share_input, msg);
    } else {
      Bytes msg = ch_.recv_msg(net::MsgType::share_input);
      if (msg.size() < 4) throw ProtocolError("input_arith_dyn: bad frame");
      u32 count = get_u32be(msg.data());
      if (msg.size() != 4 + u64(count) * 8) throw ProtocolError("input_arith_dyn: size mismatch");
      out.v.resize(count);
      for (size_t i = 0; i < count; i++) out.v[i] = get_u64le(msg.data() + 4 + i * 8);
    }
    return out;
  }

  BitVec input_bits(int owner, size_t count, const BitVec* bits = nullptr) {
    BitVec out = BitVec::zeros(count);
    size_t words = out.w.size();
    if (party_ == owner) {
      if (!bits || bits->n != count) throw Error("input_bits: bad bits");
      Bytes msg;
      for (size_t i = 0; i < words; i++) {
        u64 peer = rng_.next();
        out.w[i] = bits->w[i] ^ peer;
        put_u64le(msg, peer);
      }
      ch_.send_msg(net::MsgType::share_input, msg);
    } else {
      Bytes msg = ch_.recv_msg(net::MsgType::share_input);
      if (msg.size() != words * 8) throw ProtocolError("input_bits: size mismatch");
      for (size_t i = 0; i < words; i++) out.w[i] = get_u64le(msg.data() + i * 8);
    }
    return out;
  }

  // to: 0, 1, or 2 = both; non-recipients get an empty vector
  std::vector<u64> open_arith(const AVec& x, int to = 2,
                              net::MsgType type = net::MsgType::beaver_open) {
    bool i_recv = to == 2 || to == party_;
    bool i_send = to == 2 || to != party_;
    Bytes msg;
    if (i_send) {
      for (u64 v : x.v) put_u64le(msg, v);
    }
    // party 0 sends first; in-process channels buffer so order is safe
    std::vector<u64> out;
    auto do_send = [&] { ch_.send_msg(type, msg); };
    auto do_recv = [&] {
      Bytes peer = ch_.recv_msg(type);
      if (peer.size() != x.v.size() * 8) throw ProtocolError("open_arith: size mismatch");
      out.resize(x.v.size());
      for (size_t i = 0; i < x.v.size(); i++) out[i] = x.v[i] + get_u64le(peer.data() + i * 8);
    };
    if (party_ == 0) {
      if (i_send) do_send();
      if (i_recv) do_recv();
    } else {
      if (i_recv) do_recv();
      if (i_send) do_send();
    }
    return out;
  }

  std::optional<BitVec> open_bits(const BitVec& x, int to = 2,
                                  net::MsgType type = net::MsgType::bool_open) {
    bool i_recv = to == 2 || to == party_;
    bool i_send = to == 2 || to != party_;
    Bytes msg;
    if (i_send) x.append_to(msg);
    std::optional<BitVec> out;
    auto do_send = [&] { ch_.send_msg(type, msg); };
    auto do_recv = [&] {
      Bytes peer = ch_.recv_msg(type);
      if (peer.size() != x.packed_bytes()) throw ProtocolError("open_bits: size mismatch");
      BitVec r = BitVec::read_from(peer.data(), x.n);
      for (size_t i = 0; i < x.w.size(); i++) r.w[i] ^= x.w[i];
      out = std::move(r);
    };
    if (party_ == 0) {
      if (i_send) do_send();
      if (i_recv) do_recv();
    } else {
      if (i_recv) do_recv();
      if (i_send) do_send();
    }
    return out;
  }

  // ---- local linear algebra ----

  static AVec add(const AVec& a, const AVec& b) {
    AVec r = a;
    for (size_t i = 0; i < r.v.size(); i++) r.v[i] += b.v[i];
    return r;
  }
  static AVec sub(const AVec& a, const AVec& b) {
    AVec r = a;
    for (size_t i = 0; i < r.v.size(); i++) r.v[i] -= b.v[i];
    return r;
  }
  static AVec neg(const AVec& a) {
    AVec r = a;
    for (auto& v : r.v) v = ~v + 1;
    return r;
  }
  static AVec scale(const AVec& a, u64 c) {
    AVec r = a;
    for (auto& v : r.v) v *= c;
    return r;
  }
  AVec add_const(const AVec& a, u64 c) const {
    AVec r = a;
    if (party_ == 0)
      for (auto& v : r.v) v += c;
    return r;
  }
  AVec constant(size_t n, u64 c) const {
    AVec r;
    r.v.assign(n, party_ == 0 ? c : 0);
    return r;
  }
  static u64 sum(const AVec& a) {
    u64 s = 0;
    for (u64 v : a.v) s += v;
    return s;
  }
  static AVec scalar(u64 share) { return {{share}}; }
  static AVec broadcast(const AVec& s, size_t n) {
    AVec r;
    r.v.assign(n, s.v.at(0));
    return r;
  }

  static BitVec b_xor(const BitVec& a, const BitVec& b) {
    BitVec r = a;
    for (size_t i = 0; i < r.w.size(); i++) r.w[i] ^= b.w[i];
    return r;
  }
  BitVec b_not(const BitVec& a) const {
    BitVec r = a;
    if (party_ == 0)
      for (auto& w : r.w) w = ~w;
    return r;
  }

  // ---- multiplicative gates (one communication round per batch) ----

  AVec mul(const AVec& x, const AVec& y) {
    auto rs = mul_batch({&x}, {&y});
    return std::move(rs[0]);
  }

  std::vector<AVec> mul_batch(const std::vector<const AVec*>& xs,
                              const std::vector<const AVec*>& ys) {
    size_t total = 0;
    for (auto* x : xs) total += x->size();
    std::vector<std::array<u64, 3>> t(total);
    AVec d, e;
    d.v.reserve(total);
    e.v.reserve(total);
    size_t k = 0;
    for (size_t g = 0; g < xs.size(); g++) {
      for (size_t i = 0; i < xs[g]->size(); i++, k++) {
        t[k] = triples_.arith_triple();
        d.v.push_back(xs[g]->v[i] - t[k][0]);
        e.v.push_back(ys[g]->v[i] - t[k][1]);
      }
    }
    AVec both;
    both.v = d.v;
    both.v.insert(both.v.end(), e.v.begin(), e.v.end());
    std::vector<u64> opened = open_arith(both);
    std::vector<AVec> out(xs.size());
    k = 0;
    for (size_t g = 0; g < xs.size(); g++) {
      out[g].v.resize(xs[g]->size());
      for (size_t i = 0; i < xs[g]->size(); i++, k++) {
        u64 dv = opened[k], ev = opened[total + k];
        u64 z = t[k][2] + dv * t[k][1] + ev * t[k][0];
        if (party_ == 0) z += dv * ev;
        out[g].v[i] = z;
      }
    }
    return out;
  }

  BitVec b_and(const BitVec& x, const BitVec& y) {
    auto rs = b_and_batch({&x}, {&y});
    return std::move(rs[0]);
  }

  std::vector<BitVec> b_and_batch(const std::vector<const BitVec*>& xs,
                                  const std::vector<const BitVec*>& ys) {
    size_t groups = xs.size();
    std::vector<std::vector<std::array<u64, 3>>> trip(groups);
    std::vector<BitVec> d(groups), e(groups);
    BitWriter wr;
    for (size_t g = 0; g < groups; g++) {
      size_t nw = xs[g]->w.size();
      trip[g].resize(nw);
      d[g] = BitVec::zeros(xs[g]->n);
      e[g] = BitVec::zeros(xs[g]->n);
      for (size_t i = 0; i < nw; i++) {
        trip[g][i] = triples_.bool_word_triple();
        d[g].w[i] = xs[g]->w[i] ^ trip[g][i][0];
        e[g].w[i] = ys[g]->w[i] ^ trip[g][i][1];
      }
      wr.push(d[g]);
      wr.push(e[g]);
    }
    Bytes msg = std::move(wr.buf);
    Bytes peer;
    if (party_ == 0) {
      ch_.send_msg(net::MsgType::bool_open, msg);
      peer = ch_.recv_msg(net::MsgType::bool_open);
    } else {
      peer = ch_.recv_msg(net::MsgType::bool_open);
      ch_.send_msg(net::MsgType::bool_open, msg);
    }
    if (peer.size() != msg.size()) throw ProtocolError("b_and_batch: size mismatch");
    BitReader rd(peer.data(), peer.size());
    std::vector<BitVec> out(groups);
    for (size_t g = 0; g < groups; g++) {
      size_t nw = xs[g]->w.size();
      BitVec dp = rd.read(xs[g]->n);
      BitVec ep = rd.read(xs[g]->n);
      out[g] = BitVec::zeros(xs[g]->n);
      for (size_t i = 0; i < nw; i++) {
        u64 dv = d[g].w[i] ^ dp.w[i];
        u64 ev = e[g].w[i] ^ ep.w[i];
        u64 z = trip[g][i][2] ^ (dv & trip[g][i][1]) ^ (ev & trip[g][i][0]);
        if (party_ == 0) z ^= dv & ev;
        out[g].w[i] = z;
      }
    }
    return out;
  }

  // ---- bitsliced adder (Kogge-Stone prefix) ----

  // X + Y + cin over `bits` columns; cin may be null (zero). Returns sum
  // columns; carry_out optionally written.
  BitCols ks_add(const BitCols& X, const BitCols& Y, const BitVec* cin = nullptr,
                 BitVec* carry_out = nullptr) {
    size_t bits = X.size();
    size_t lanes = X[0].n;
    std::vector<const BitVec*> gx(bits), gy(bits);
    for (size_t i = 0; i < bits; i++) {
      gx[i] = &X[i];
      gy[i] = &Y[i];
    }
    BitCols G = b_and_batch(gx, gy);
    BitCols P(bits), P0(bits);
    for (size_t i = 0; i < bits; i++) {
      P[i] = b_xor(X[i], Y[i]);
      P0[i] = P[i];
    }
    for (size_t s = 1; s < bits; s <<= 1) {
      std::vector<const BitVec*> lx, ly;
      for (size_t i = bits; i-- > s;) {
        lx.push_back(&P[i]);
        ly.push_back(&G[i - s]);
        lx.push_back(&P[i]);
        ly.push_back(&P[i - s]);
      }
      BitCols r = b_and_batch(lx, ly);
      size_t k = 0;
      for (size_t i = bits; i-- > s;) {
        G[i] = b_xor(G[i], r[k]);
        P[i] = r[k + 1];
        k += 2;
      }
    }
    // carry into bit i: G*[i-1] ^ (P*[i-1] & cin)
    BitCols carries(bits);
    carries[0] = cin ? *cin : BitVec::zeros(lanes);
    if (cin) {
      std::vector<const BitVec*> lx, ly;
      for (size_t i = 1; i < bits; i++) {
        lx.push_back(&P[i - 1]);
        ly.push_back(cin);
      }
      BitCols pc = b_and_batch(lx, ly);
      for (size_t i = 1; i < bits; i++) carries[i] = b_xor(G[i - 1], pc[i - 1]);
      if (carry_out) {
        BitVec pt = b_and(P[bits - 1], *cin);
        *carry_out = b_xor(G[bits - 1], pt);
      }
    } else {
      for (size_t i = 1; i < bits; i++) carries[i] = G[i - 1];
      if (carry_out) *carry_out = G[bits - 1];
    }
    BitCols S(bits);
    for (size_t i = 0; i < bits; i++) S[i] = b_xor(P0[i], carries[i]);
    return S;
  }

  // X - Y: returns difference columns; borrow (= [X < Y] unsigned) optional
  BitCols ks_sub(const BitCols& X, const BitCols& Y, BitVec* borrow = nullptr) {
    size_t lanes = X[0].n;
    BitCols notY(Y.size());
    for (size_t i = 0; i < Y.size(); i++) notY[i] = b_not(Y[i]);
    BitVec one = one_bits(lanes);
    BitVec carry_out;
    BitCols D = ks_add(X, notY, &one, &carry_out);
    if (borrow) *borrow = b_not(carry_out);
    return D;
  }

  // public constant 1 as shared bits
  BitVec one_bits(size_t lanes) {
    BitVec v = BitVec::zeros(lanes);
    if (party_ == 0)
      for (size_t i = 0; i < lanes; i++) v.set(i, true);
    return v;
  }

  // ---- conversions ----

  // arithmetic shares -> bitsliced columns of the reconstructed value
  BitCols a2b(const AVec& x, size_t bits = 64) {
    size_t lanes = x.size();
    BitCols X(bits), Y(bits);
    for (size_t k = 0; k < bits; k++) {
      X[k] = BitVec::zeros(lanes);
      Y[k] = BitVec::zeros(lanes);
    }
    for (size_t i = 0; i < lanes; i++) {
      u64 mine = x.v[i];
      for (size_t k = 0; k < bits; k++)
        if ((mine >> k) & 1) (party_ == 0 ? X : Y)[k].set(i, true);
    }
    return ks_add(X, Y);
  }

  // XOR-shared bits -> additive shares of the same 0/1 values
  AVec b2a(const BitVec& f) {
    AVec u, v;
    u.v.assign(f.n, 0);
    v.v.assign(f.n, 0);
    auto& mine = party_ == 0 ? u : v;
    for (size_t i = 0; i < f.n; i++) mine.v[i] = f.get(i) ? 1 : 0;
    AVec uv = mul(u, v);
    AVec r = add(u, v);
    for (size_t i = 0; i < f.n; i++) r.v[i] -= 2 * uv.v[i];
    return r;
  }

  std::vector<AVec> b2a_batch(const std::vector<const BitVec*>& fs) {
    std::vector<AVec> us(fs.size()), vs(fs.size());
    std::vector<const AVec*> pu(fs.size()), pv(fs.size());
    for (size_t g = 0; g < fs.size(); g++) {
      us[g].v.assign(fs[g]->n, 0);
      vs[g].v.assign(fs[g]->n, 0);
      auto& mine = party_ == 0 ? us[g] : vs[g];
      for (size_t i = 0; i < fs[g]->n; i++) mine.v[i] = fs[g]->get(i) ? 1 : 0;
      pu[g] = &us[g];
      pv[g] = &vs[g];
    }
    std::vector<AVec> prods = mul_batch(pu, pv);
    std::vector<AVec> out(fs.size());
    for (size_t g = 0; g < fs.size(); g++) {
      out[g] = add(us[g], vs[g]);
      for (size_t i = 0; i < fs[g]->n; i++) out[g].v[i] -= 2 * prods[g].v[i];
    }
    return out;
  }

  AVec bits_to_arith(const BitCols& cols) {
    std::vector<const BitVec*> ptrs;
    for (const auto& c : cols) ptrs.push_back(&c);
    std::vector<AVec> arith = b2a_batch(ptrs);
    AVec r;
    r.v.assign(cols[0].n, 0);
    for (size_t k = 0; k < cols.size(); k++)
      for (size_t i = 0; i < r.v.size(); i++) r.v[i] += arith[k].v[i] << k;
    return r;
  }

  // ---- comparisons ----

  BitVec all_zero(const BitCols& cols) {
    BitCols work(cols.size());
    for (size_t i = 0; i < cols.size(); i++) work[i] = b_not(cols[i]);
    while (work.size() > 1) {
      size_t half = work.size() / 2;
      std::vector<const BitVec*> lx, ly;
      for (size_t i = 0; i < half; i++) {
        lx.push_back(&work[2 * i]);
        ly.push_back(&work[2 * i + 1]);
      }
      BitCols merged = b_and_batch(lx, ly);
      if (work.size() % 2) merged.push_back(work.back());
      work = std::move(merged);
    }
    return work[0];
  }

  BitVec eq_zero(const AVec& x) { return all_zero(a2b(x)); }
  BitVec eq(const AVec& x, const AVec& y) { return eq_zero(sub(x, y)); }

  // 128-bit equality given two 64-bit limb vectors per side
  BitVec eq128(const AVec& xlo, const AVec& xhi, const AVec& ylo, const AVec& yhi) {
    AVec dl = sub(xlo, ylo), dh = sub(xhi, yhi);
    AVec both;
    both.v = dl.v;
    both.v.insert(both.v.end(), dh.v.begin(), dh.v.end());
    BitVec z = eq_zero(both);
    size_t n = dl.size();
    BitVec lo = BitVec::zeros(n), hi = BitVec::zeros(n);
    for (size_t i = 0; i < n; i++) {
      lo.set(i, z.get(i));
      hi.set(i, z.get(n + i));
    }
    return b_and(lo, hi);
  }

  // unsigned [x < y]
  BitVec lt(const AVec& x, const AVec& y) {
    BitCols X = a2b(x), Y = a2b(y);
    BitVec borrow;
    ks_sub(X, Y, &borrow);
    return borrow;
  }

  // c ? a : b via b + c*(a-b)
  AVec mux(const BitVec& c, const AVec& a, const AVec& b) {
    AVec m = b2a(c);
    return add(b, mul(m, sub(a, b)));
  }

  // ---- sampling and composite gates ----

  // each party contributes p local bits per lane; XOR is share-local, so the
  // value is uniform on [0, 2^p-1] and unknown to either party alone
  AVec joint_random_bits(size_t lanes, int p, Rng& local_rng) {
    if (p == 0) {
      AVec z;
      z.v.assign(lanes, 0);
      return z;
    }
    BitCols cols;
    cols.resize(size_t(p));
    for (int k = 0; k < p; k++) {
      cols[size_t(k)] = BitVec::zeros(lanes);
      for (size_t i = 0; i < lanes; i++) cols[size_t(k)].set(i, local_rng.bit());
    }
    return bits_to_arith(cols);
  }

  // floor(r * eta / 2^p): product taken in-circuit, truncated by dropping
  // the low p columns of the reconstructed product
  AVec scale_and_truncate(const AVec& r, const AVec& eta, int p) {
    AVec prod = mul(r, eta);
    BitCols cols = a2b(prod);
    BitCols kept(cols.begin() + p, cols.end());
    return bits_to_arith(kept);
  }

  // (sum of flag*value, sum of flags) as scalar shares
  std::pair<AVec, AVec> conditional_sum(const BitVec& flags, const AVec& vals) {
    AVec m = b2a(flags);
    AVec terms = mul(m, vals);
    return {scalar(sum(terms)), scalar(sum(m))};
  }

  // round-to-nearest (ties away from zero) of num/den on signed num,
  // positive den; quotient revealed only to `to`
  std::optional<i64> div_reveal_signed(const AVec& num, const AVec& den, int to) {
    BitCols ncols = a2b(num);
    BitVec s = ncols[63];
    AVec absn = mux(s, neg(num), num);
    AVec n2 = add(scale(absn, 2), den);  // 2|num| + den
    AVec d2 = scale(den, 2);
    BitCols q = divide_bits(a2b(n2), a2b(d2));
    AVec qa = bits_to_arith(q);
    AVec res = mux(s, neg(qa), qa);
    auto opened = open_arith(res, to, net::MsgType::reveal_out);
    if (opened.empty()) return std::nullopt;
    return i64(opened[0]);
  }

  // restoring long division on bitsliced columns (single or multi lane)
  BitCols divide_bits(const BitCols& N, const BitCols& D) {
    size_t bits = N.size();
    size_t lanes = N[0].n;
    BitCols rem(bits);
    for (size_t i = 0; i < bits; i++) rem[i] = BitVec::zeros(lanes);
    BitCols q(bits);
    for (size_t i = bits; i-- > 0;) {
      for (size_t k = bits; k-- > 1;) rem[k] = rem[k - 1];
      rem[0] = N[i];
      BitVec borrow;
      BitCols diff = ks_sub(rem, D, &borrow);
      BitVec take = b_not(borrow);  // rem >= D
      q[i] = take;
      // rem = take ? diff : rem  (columnwise)
      std::vector<BitVec> deltas(bits);
      std::vector<const BitVec*> lx, ly;
      for (size_t k = 0; k < bits; k++) {
        deltas[k] = b_xor(diff[k], rem[k]);
        lx.push_back(&deltas[k]);
        ly.push_back(&take);
      }
      BitCols gated = b_and_batch(lx, ly);
      for (size_t k = 0; k < bits; k++) rem[k] = b_xor(rem[k], gated[k]);
    }
    return q;
  }

  // values[mu-th flagged position]; idx counts flagged positions from 0
  AVec select_at_shared_index(const BitVec& flags, const AVec& vals, const AVec& idx) {
    size_t n = flags.n;
    AVec m = b2a(flags);
    AVec prefix;
    prefix.v.resize(n);
    u64 run = 0;
    for (size_t i = 0; i < n; i++) {
      run += m.v[i];
      prefix.v[i] = run;
    }
    AVec target = broadcast(add_const(idx, 1), n);
    BitVec hits = eq(prefix, target);
    BitVec sel = b_and(hits, flags);
    AVec sv = b2a(sel);
    AVec terms = mul(sv, vals);
    return scalar(sum(terms));
  }

 private:
  int party_;
  net::Channel& ch_;
  TripleProvider triples_;
  Rng rng_;
};

}  // namespace privimpute::mpc
