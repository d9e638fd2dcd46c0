#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <cmath>
#include <thread>

#include "mzi/harness/encoding.hpp"
#include "mzi/harness/server.hpp"
#include "mzi/harness/session.hpp"

namespace {

using namespace mzi::harness;
using nlohmann::json;

json create_deterministic(SessionManager& m, std::uint64_t seed) {
  const auto replies = m.handle({{"type", "create"}, {"payload", {{"deterministic", true}, {"seed", seed}}}});
  EXPECT_EQ(replies.size(), 2u);
  return replies.front();
}

json step(SessionManager& m, const std::string& id, json action, const std::string& units = "physical") {
  const auto replies = m.handle({{"type", "step"}, {"session", id}, {"payload", {{"action", action}, {"units", units}}}});
  return replies.front();
}

TEST(SessionTest, CreateReturnsIdObservationAndFrames) {
  SessionManager m{mzi::env::EnvConfig{}};
  const auto replies = m.handle({{"type", "create"}, {"payload", {{"seed", 5}}}});
  ASSERT_EQ(replies.size(), 2u);
  const json& created = replies[0];
  EXPECT_EQ(created["type"], "create");
  const std::string id = created["session"];
  EXPECT_EQ(id.size(), 16u);
  EXPECT_EQ(created["payload"]["step"], 0);
  EXPECT_EQ(created["payload"]["control_state"].size(), 5u);
  EXPECT_EQ(created["payload"]["bounds"][0], 2.6e-3);

  const json& batch = replies[1];
  EXPECT_EQ(batch["type"], "frame-batch");
  EXPECT_EQ(batch["session"], id);
  EXPECT_EQ(batch["payload"]["seq"], created["payload"]["seq"]);
  ASSERT_EQ(batch["payload"]["frames"].size(), 16u);
  ASSERT_EQ(batch["payload"]["totals"].size(), 16u);
  for (std::size_t f = 0; f < 16; ++f) {
    const auto png = base64_decode(batch["payload"]["frames"][f].get<std::string>());
    const GrayImage img = decode_png_gray8(png);
    EXPECT_EQ(img.width, 64);
    EXPECT_EQ(img.height, 64);
    double mean = 0.0;
    for (auto p : img.pixels) mean += p / 255.0;
    mean /= static_cast<double>(img.pixels.size());
    const double total = batch["payload"]["totals"][f];
    EXPECT_GE(total, 0.0);
    EXPECT_LE(total, 1.0);
    EXPECT_NEAR(mean, total, 0.5 / 255.0 + 1e-9);  // PNG holds the 8-bit quantised frame
  }
  EXPECT_EQ(m.session_count(), 1u);
}

TEST(SessionTest, ZeroActionKeepsVisibility) {
  SessionManager m{mzi::env::EnvConfig{}};
  const json created = create_deterministic(m, 9);
  const std::string id = created["session"];
  const json reply = step(m, id, {0, 0, 0, 0, 0});
  EXPECT_EQ(reply["type"], "step");
  EXPECT_EQ(reply["payload"]["visibility"].get<double>(), created["payload"]["visibility"].get<double>());
  EXPECT_EQ(reply["payload"]["control_state"], created["payload"]["control_state"]);
  EXPECT_FALSE(reply["payload"]["done"].get<bool>());
}

TEST(SessionTest, OutOfBoundsPhysicalActionTerminatesWithPenalty) {
  SessionManager m{mzi::env::EnvConfig{}};
  const json created = create_deterministic(m, 1);
  const std::string id = created["session"];
  const json reply = step(m, id, {0, 0, 0, 0, 20.0});
  EXPECT_TRUE(reply["payload"]["done"].get<bool>());
  EXPECT_TRUE(reply["payload"]["terminated_unsafe"].get<bool>());
  EXPECT_EQ(reply["payload"]["reward"].get<double>(), -0.04);
  EXPECT_EQ(reply["payload"]["control_state"], created["payload"]["control_state"]);
  // A finished episode refuses further steps until reset.
  const json again = step(m, id, {0, 0, 0, 0, 0});
  EXPECT_EQ(again["type"], "error");
  EXPECT_EQ(again["payload"]["code"], "episode-done");
  const auto reset = m.handle({{"type", "reset"}, {"session", id}, {"payload", {{"seed", 2}}}});
  EXPECT_EQ(reset.front()["type"], "reset");
  EXPECT_EQ(reset.front()["payload"]["episode"], 1);
  EXPECT_EQ(step(m, id, {0, 0, 0, 0, 0})["type"], "step");
}

TEST(SessionTest, InterleavedSessionsAreIsolated) {
  SessionManager m{mzi::env::EnvConfig{}};
  const std::string a = create_deterministic(m, 3)["session"];
  const std::string b = create_deterministic(m, 3)["session"];
  ASSERT_NE(a, b);
  step(m, a, {1e-4, 0, 0, 0, 0});
  step(m, b, {0, 0, 0, 0, -1.0});
  step(m, a, {0, 1e-4, 0, 0, 0});
  const json ha = m.handle({{"type", "history"}, {"session", a}}).front();
  const json hb = m.handle({{"type", "history"}, {"session", b}}).front();
  ASSERT_EQ(ha["payload"]["records"].size(), 2u);
  ASSERT_EQ(hb["payload"]["records"].size(), 1u);
  EXPECT_EQ(hb["payload"]["records"][0]["physical_action"][4], -1.0);
  EXPECT_EQ(ha["payload"]["records"][1]["physical_action"][1], 1e-4);

  // The same moves on a fresh session reproduce session a exactly.
  const std::string c = create_deterministic(m, 3)["session"];
  step(m, c, {1e-4, 0, 0, 0, 0});
  step(m, c, {0, 1e-4, 0, 0, 0});
  const json hc = m.handle({{"type", "history"}, {"session", c}}).front();
  EXPECT_EQ(hc["payload"]["records"][1]["visibility"], ha["payload"]["records"][1]["visibility"]);
}

TEST(SessionTest, MalformedRequestsLeaveSessionUnchanged) {
  SessionManager m{mzi::env::EnvConfig{}};
  const std::string id = create_deterministic(m, 4)["session"];
  const json before = m.handle({{"type", "history"}, {"session", id}}).front();
  const std::vector<json> bad = {
      {{"type", "step"}, {"session", id}, {"payload", {{"action", {0, 0, 0}}}}},
      {{"type", "step"}, {"session", id}, {"payload", {{"action", {0, 0, 0, 0, "x"}}}}},
      {{"type", "step"}, {"session", id}, {"payload", {{"action", {0, 0, 0, 0, 0}}, {"units", "furlongs"}}}},
      {{"type", "step"}, {"session", id}, {"payload", {{"action", {2, 0, 0, 0, 0}}, {"units", "raw"}}}},
      {{"type", "step"}, {"session", id}, {"payload", {}}},
      {{"type", "step"}, {"session", id}, {"payload", 7}},
      {{"type", "reset"}, {"session", id}, {"payload", {{"initial_state", {1, 0, 0, 0, 0}}}}},
      {{"type", "reset"}, {"session", id}, {"payload", {{"seed", -3}}}},
      {{"type", "teleport"}, {"session", id}},
  };
  for (const json& msg : bad) {
    const auto replies = m.handle(msg);
    ASSERT_EQ(replies.size(), 1u);
    EXPECT_EQ(replies[0]["type"], "error") << msg.dump();
    EXPECT_EQ(replies[0]["session"], id);
  }
  const json after = m.handle({{"type", "history"}, {"session", id}}).front();
  EXPECT_EQ(after, before);
}

TEST(SessionTest, UnknownSessionAndBadJson) {
  SessionManager m{mzi::env::EnvConfig{}};
  const auto r = m.handle({{"type", "step"}, {"session", "nope"}, {"payload", {{"action", {0, 0, 0, 0, 0}}}}});
  EXPECT_EQ(r[0]["type"], "error");
  EXPECT_EQ(r[0]["payload"]["code"], "unknown-session");
  const auto t = m.handle_text("{not json");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(json::parse(t[0])["payload"]["code"], "malformed");
  EXPECT_EQ(m.handle({{"type", "step"}})[0]["payload"]["code"], "malformed");
}

TEST(SessionTest, RawUnitsGoThroughRescaling) {
  SessionManager m{mzi::env::EnvConfig{}};
  const std::string id = create_deterministic(m, 6)["session"];
  const json reply = step(m, id, {1.0, 0.1, -0.5, 0, 0}, "raw");
  const auto p = reply["payload"]["physical_action"];
  EXPECT_EQ(p[0].get<double>(), 2.6e-3);
  EXPECT_EQ(p[1].get<double>(), 0.0);
  EXPECT_NEAR(p[2].get<double>(), -1.3e-3 * std::pow(10.0, -1.5), 1e-15);
}

TEST(SessionTest, NegatingTheMisalignmentRealigns) {
  SessionManager m{mzi::env::EnvConfig{}};
  const json created = create_deterministic(m, 8);
  const std::string id = created["session"];
  const auto ctrl = created["payload"]["control_state"].get<std::vector<double>>();
  json reply;
  for (std::size_t i = 0; i < 5; ++i) {
    json action = {0, 0, 0, 0, 0};
    action[i] = -ctrl[i];
    reply = step(m, id, action);
  }
  EXPECT_GT(reply["payload"]["visibility"].get<double>(), 1.0 - 1e-9);
  EXPECT_GT(reply["payload"]["visibility_frames"].get<double>(), 0.999);
}

// ---- over a real websocket --------------------------------------------------

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    boost::asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }
  ~Client() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }
  void send(const json& j) { ws_.write(boost::asio::buffer(j.dump())); }
  json receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }

 private:
  boost::asio::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

TEST(SessionServerTest, WebsocketRoundTrip) {
  SessionManager m{mzi::env::EnvConfig{}};
  SessionServer server(m, "127.0.0.1", 0);
  server.start(2);
  ASSERT_NE(server.port(), 0);

  Client a(server.port());
  Client b(server.port());
  a.send({{"type", "create"}, {"payload", {{"deterministic", true}, {"seed", 3}}}});
  const json created = a.receive();
  EXPECT_EQ(created["type"], "create");
  const json frames = a.receive();
  EXPECT_EQ(frames["type"], "frame-batch");
  EXPECT_EQ(frames["payload"]["frames"].size(), 16u);
  const std::string id = created["session"];

  // A second connection can drive the same session by id.
  b.send({{"type", "step"}, {"session", id}, {"payload", {{"action", {0, 0, 0, 0, 0}}}}});
  const json stepped = b.receive();
  EXPECT_EQ(stepped["type"], "step");
  EXPECT_EQ(stepped["payload"]["visibility"], created["payload"]["visibility"]);
  EXPECT_EQ(b.receive()["payload"]["seq"], 2);

  a.send({{"type", "history"}, {"session", id}});
  const json history = a.receive();
  EXPECT_EQ(history["payload"]["records"].size(), 1u);

  b.send({{"type", "step"}, {"session", "missing"}, {"payload", {{"action", {0, 0, 0, 0, 0}}}}});
  EXPECT_EQ(b.receive()["type"], "error");
}

TEST(SessionServerTest, StopClosesOpenConnections) {
  SessionManager m{mzi::env::EnvConfig{}};
  SessionServer server(m, "127.0.0.1", 0);
  server.start();
  Client c(server.port());
  c.send({{"type", "create"}, {"payload", {{"seed", 1}}}});
  c.receive();
  c.receive();
  server.stop();
  EXPECT_THROW(c.receive(), boost::system::system_error);
}

TEST(SessionServerTest, ConcurrentSessionsFromManyClients) {
  SessionManager m{mzi::env::EnvConfig{}};
  SessionServer server(m, "127.0.0.1", 0);
  server.start(2);
  constexpr int kClients = 4;
  std::vector<std::thread> threads;
  std::vector<int> ok(kClients, 0);
  for (int c = 0; c < kClients; ++c) {
    threads.emplace_back([&, c] {
      Client client(server.port());
      client.send({{"type", "create"}, {"payload", {{"seed", 100 + c}}}});
      const std::string id = client.receive()["session"];
      client.receive();
      for (int s = 0; s < 5; ++s) {
        client.send({{"type", "step"}, {"session", id}, {"payload", {{"action", {0, 0, 0, 0, 0.01 * c}}}}});
        const json r = client.receive();
        const json f = client.receive();
        if (r["type"] == "step" && f["type"] == "frame-batch" && r["payload"]["step"] == s + 1) ++ok[c];
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int c = 0; c < kClients; ++c) EXPECT_EQ(ok[c], 5);
  EXPECT_EQ(m.session_count(), static_cast<std::size_t>(kClients));
}

}  // namespace
