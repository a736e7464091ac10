#include "aeal/transport.hpp"
#include "aeal/wire.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <limits>
#include <thread>

using namespace aeal;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidArgument;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

const std::vector<double> kAwkward{0.1, 1.0 / 3.0, -0.0, 1e-310, 2.0, -7.25e300, std::numeric_limits<double>::max(),
                                    std::numeric_limits<double>::min(), 123456789012345678.0};

}  // namespace

TEST(Wire, OffsetRoundTripIsBitExact) {
  const msg::Offset o{7, kAwkward, true};
  const std::string line = encode(o);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const auto back = std::get<msg::Offset>(decode(line));
  EXPECT_EQ(back.round, 7);
  EXPECT_TRUE(back.final);
  EXPECT_TRUE(same_bits(back.nu, kAwkward));
  EXPECT_EQ(encode(back), line);
  EXPECT_FALSE(std::get<msg::Offset>(decode(encode(msg::Offset{1, {1.0}, false}))).final);
}

TEST(Wire, EveryMessageRoundTrips) {
  msg::Hello h{std::string(kProtocolVersion), 3, "logistic", 0.01, "train", 2, std::vector<std::string>{"a", "b,\"c\""}};
  msg::SketchOffer s;
  s.rows = 2;
  s.t = 2;
  s.projected = {1, 2, 3, 4};
  s.noised = true;
  s.epsilon = 1.5;
  s.noise_scale = 0.25;
  s.rows_excluded = {4};
  const std::vector<Message> all{h,
                                 msg::HelloAck{"aeal/1", 3, std::nullopt},
                                 s,
                                 msg::ScreenResult{12.5, 2, 0.002, true, 0.05},
                                 msg::ResponseShare{{0, 1, 1}, 0.1},
                                 msg::Offset{0, {0.5}, false},
                                 msg::GradShare{3, {-0.25, 0.75}},
                                 msg::VarianceShare{{0.1}},
                                 msg::PredictRequest{{"x"}},
                                 msg::PredictContribution{{1.0}, {0.5}},
                                 msg::Stop{"offset_tol"},
                                 msg::Abort{"bad input"}};
  for (const Message& m : all) {
    const std::string line = encode(m);
    const Message back = decode(line);
    EXPECT_EQ(back.index(), m.index()) << line;
    EXPECT_EQ(encode(back), line);
    EXPECT_NE(line.find("\"type\":\"" + std::string(message_type(m)) + "\""), std::string::npos) << line;
  }
  const auto hb = std::get<msg::Hello>(decode(encode(h)));
  EXPECT_EQ(hb.ids->at(1), "b,\"c\"");
  EXPECT_EQ(*hb.t, 2);
  EXPECT_FALSE(std::get<msg::SketchOffer>(decode(encode(s))).clip_bound.has_value());
}

TEST(Wire, RejectsBadInput) {
  EXPECT_EQ(code_of([] { decode("{not json"); }), Errc::ProtocolError);
  EXPECT_EQ(code_of([] { decode("[1,2]"); }), Errc::ProtocolError);
  EXPECT_EQ(code_of([] { decode(R"({"type":"Teleport"})"); }), Errc::ProtocolError);
  EXPECT_EQ(code_of([] { decode(R"({"type":"Stop"})"); }), Errc::ProtocolError);
  EXPECT_EQ(code_of([] { decode(R"({"type":"Stop","reason":"x","extra":1})"); }), Errc::ProtocolError);
  EXPECT_EQ(code_of([] { decode(R"({"type":"Offset","round":0,"nu":["a"]})"); }), Errc::ProtocolError);
  EXPECT_EQ(code_of([] {
              decode(R"({"type":"SketchOffer","rows":2,"t":2,"projected":[1,2,3],"noised":false,"noise_scale":0,)"
                     R"("rows_excluded":[]})");
            }),
            Errc::ProtocolError);
  EXPECT_EQ(code_of([] { encode(msg::Offset{0, {std::nan("")}, false}); }), Errc::ProtocolError);
}

TEST(Channel, MemoryPairCountsBytesAndOffsets) {
  auto [a, b] = memory_pair();
  const msg::Offset o{0, {1.5, 2.5}, false};
  const std::size_t len = encode(o).size() + 1;
  a->send(o);
  const auto got = b->expect<msg::Offset>();
  EXPECT_EQ(got.nu, o.nu);
  EXPECT_EQ(a->bytes_sent(), len);
  EXPECT_EQ(b->bytes_received(), len);
  EXPECT_EQ(a->offsets_seen(), 1u);
  EXPECT_EQ(b->offsets_seen(), 1u);
  ASSERT_EQ(a->transcript().size(), 1u);
  EXPECT_TRUE(a->transcript()[0].sent);
  EXPECT_FALSE(b->transcript()[0].sent);
  EXPECT_EQ(a->transcript()[0].line, b->transcript()[0].line);
}

TEST(Channel, UnexpectedAndAbort) {
  auto [a, b] = memory_pair();
  a->send(msg::Stop{"done"});
  EXPECT_EQ(code_of([&] { b->expect<msg::Offset>(); }), Errc::ProtocolError);
  a->abort("giving up");
  try {
    (void)b->recv();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProtocolError);
    EXPECT_NE(std::string(e.what()).find("giving up"), std::string::npos);
  }
  a->close();
  EXPECT_EQ(code_of([&] { b->recv(); }), Errc::TransportFailure);
}

TEST(Channel, ReplayChecksSentLines) {
  Transcript rec{{true, encode(msg::Stop{"a"})}, {false, encode(msg::Offset{0, {1.0}, false})}};
  ReplayChannel ok(rec);
  ok.send(msg::Stop{"a"});
  EXPECT_EQ(ok.expect<msg::Offset>().nu[0], 1.0);
  EXPECT_EQ(code_of([&] { ok.recv(); }), Errc::TransportFailure);
  ReplayChannel bad(rec);
  EXPECT_EQ(code_of([&] { bad.send(msg::Stop{"b"}); }), Errc::ProtocolError);
}

TEST(Channel, TcpLoopback) {
  TcpListener listener("127.0.0.1:0");
  const int port = listener.port();
  ASSERT_GT(port, 0);
  std::thread server([&] {
    auto ch = listener.accept();
    auto o = ch->expect<msg::Offset>();
    ch->send(msg::Offset{o.round + 1, o.nu, true});
  });
  auto client = tcp_connect("127.0.0.1:" + std::to_string(port));
  // large enough to span several recv chunks
  std::vector<double> big(20000);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = kAwkward[i % kAwkward.size()] / (1.0 + i);
  client->send(msg::Offset{4, big, false});
  const auto back = client->expect<msg::Offset>();
  server.join();
  EXPECT_EQ(back.round, 5);
  EXPECT_TRUE(back.final);
  EXPECT_TRUE(same_bits(back.nu, big));
  EXPECT_EQ(code_of([&] { client->recv(); }), Errc::TransportFailure);
}

TEST(Channel, BadAddress) {
  EXPECT_EQ(code_of([] { TcpListener("no-port"); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { tcp_connect("127.0.0.1:1", std::chrono::milliseconds(100)); }), Errc::TransportFailure);
}
