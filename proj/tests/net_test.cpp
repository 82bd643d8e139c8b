// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mvgb/kv.hpp"
#include "mvgb/net/checkpoint.hpp"

using namespace mvgb;
using namespace mvgb::net;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using mvgb::testing::random_tensor;
using nn::ForwardContext;
using nn::ShapeTrace;

namespace {

ShapeTrace trace_of(const CrnnSpec &spec, std::uint64_t seed = 1) {
  ad::Rng rng(seed);
  Crnn net(spec, rng);
  Tape tape;
  ShapeTrace trace;
  ForwardContext ctx{tape, false, nullptr, &trace};
  Shape in{1};
  in.insert(in.end(), spec.input.begin(), spec.input.end());
  net.forward(ctx, tape.constant(Tensor(in, 0.1)));
  return trace;
}

Shape find(const ShapeTrace &trace, const std::string &layer, std::size_t nth = 0) {
  for (const auto &[name, shape] : trace)
    if (name == layer && nth-- == 0)
      return shape;
  ADD_FAILURE() << "layer " << layer << " not in trace";
  return {};
}

// Closed-form count of trainable parameters, written from the layer definitions.
std::size_t expected_params(const CrnnSpec &s) {
  std::size_t n = 0, channels = 1;
  auto conv = [&](const nn::ConvBlockSpec &b) {
    n += b.kernel.rows * b.kernel.cols * channels * b.filters + 2 * b.filters;
    channels = b.filters;
  };
  std::size_t freq = s.input[1];
  if (s.front) {
    conv(s.front->conv01);
    conv(s.front->conv02);
    freq = channels;
    channels = 1;
  }
  for (const auto &b : s.blocks) {
    conv(b);
    if (b.pool)
      freq /= b.pool_stride.cols;
  }
  const std::size_t d = freq * channels, h = s.gru_hidden;
  n += 2 * (3 * h * d + 3 * h * h + 3 * h);
  n += 2 * h * s.attention_dim + 2 * s.attention_dim;
  std::size_t width = 2 * h;
  for (std::size_t w : s.fc_widths) {
    n += width * w + w;
    width = w;
  }
  n += width * s.n_classes + s.n_classes;
  return n;
}

NetworkConfig reduced(std::vector<View> views = {View::mel, View::gam, View::cqt, View::raw}) {
  NetworkConfig c;
  c.n_classes = 4;
  c.views = std::move(views);
  return c;
}

ViewInputs random_inputs(Tape &tape, const NetworkConfig &cfg, std::size_t batch, ad::Rng &rng) {
  ViewInputs in;
  for (View v : cfg.views) {
    Shape s{batch};
    const Shape per = cfg.input_shape(v);
    s.insert(s.end(), per.begin(), per.end());
    in[index_of(v)] = tape.constant(random_tensor(s, rng));
  }
  return in;
}

} // namespace

TEST(Crnn2d, FullScaleTrace) {
  const ShapeTrace t = trace_of(full_crnn2d("mel", 75, 50));
  const std::size_t filters[] = {32, 64, 128, 128, 256, 512};
  EXPECT_EQ(find(t, "input"), (Shape{75, 64, 1}));
  for (std::size_t l = 1; l <= 6; ++l) {
    EXPECT_EQ(find(t, "conv-" + std::to_string(l)), (Shape{75, 64u >> (l - 1), filters[l - 1]}));
    EXPECT_EQ(find(t, "pool-" + std::to_string(l)), (Shape{75, 64u >> l, filters[l - 1]}));
  }
  EXPECT_EQ(find(t, "reshape"), (Shape{75, 512}));
  EXPECT_EQ(find(t, "biRNN"), (Shape{75, 512}));
  EXPECT_EQ(find(t, "attention"), (Shape{512}));
  EXPECT_EQ(find(t, "fc1"), (Shape{1024}));
  EXPECT_EQ(find(t, "fc2"), (Shape{1024}));
  EXPECT_EQ(find(t, "fc3"), (Shape{50}));
}

TEST(Crnn2d, CqtLength) {
  const ShapeTrace t = trace_of(full_crnn2d("cqt", 65, 10));
  EXPECT_EQ(find(t, "pool-6"), (Shape{65, 1, 512}));
  EXPECT_EQ(find(t, "attention"), (Shape{512}));
}

TEST(Crnn1d, FullScaleTrace) {
  const ShapeTrace t = trace_of(full_crnn1d("raw", 66650, 50));
  EXPECT_EQ(find(t, "input"), (Shape{66650, 1, 1}));
  EXPECT_EQ(find(t, "conv01"), (Shape{33294, 1, 32}));
  EXPECT_EQ(find(t, "conv02"), (Shape{16640, 1, 64}));
  EXPECT_EQ(find(t, "pool02"), (Shape{260, 1, 64}));
  EXPECT_EQ(find(t, "reshape"), (Shape{260, 64, 1}));
  EXPECT_EQ(find(t, "conv1"), (Shape{260, 64, 32}));
  EXPECT_EQ(find(t, "pool1"), (Shape{65, 32, 32}));
  const std::size_t filters[] = {64, 128, 128, 256, 512};
  for (std::size_t l = 2; l <= 6; ++l) {
    EXPECT_EQ(find(t, "conv-" + std::to_string(l)), (Shape{65, 64u >> (l - 1), filters[l - 2]}));
    EXPECT_EQ(find(t, "pool-" + std::to_string(l)), (Shape{65, 64u >> l, filters[l - 2]}));
  }
  EXPECT_EQ(find(t, "reshape", 1), (Shape{65, 512}));
  EXPECT_EQ(find(t, "biRNN"), (Shape{65, 512}));
  EXPECT_EQ(find(t, "attention"), (Shape{512}));
  EXPECT_EQ(find(t, "fc3"), (Shape{50}));
}

TEST(Crnn1d, HalfRateInput) {
  const ShapeTrace t = trace_of(full_crnn1d("raw", 33330, 10));
  EXPECT_EQ(find(t, "conv01"), (Shape{16634, 1, 32}));
  EXPECT_EQ(find(t, "conv02"), (Shape{8310, 1, 64}));
  EXPECT_EQ(find(t, "pool02"), (Shape{259, 1, 64}));
}

TEST(Crnn1d, UnsupportedLength) {
  EXPECT_THROW(full_crnn1d("raw", 44100, 10), std::invalid_argument);
}

TEST(Crnn, RejectsWrongInput) {
  ad::Rng rng(1);
  Crnn net(reduced_crnn2d("mel", reduced()), rng);
  Tape tape;
  ForwardContext ctx{tape};
  EXPECT_THROW(net.forward(ctx, tape.constant(Tensor({1, 16, 8, 1}))), ad::ShapeError);
}

TEST(Reduced, Traces) {
  const NetworkConfig cfg = reduced();
  ShapeTrace t = trace_of(reduced_crnn2d("mel", cfg));
  EXPECT_EQ(find(t, "pool-4"), (Shape{16, 1, 32}));
  EXPECT_EQ(find(t, "conv-6"), (Shape{16, 1, 128}));
  EXPECT_EQ(find(t, "reshape"), (Shape{16, 128}));
  EXPECT_EQ(find(t, "attention"), (Shape{64}));
  EXPECT_EQ(find(t, "fc1"), (Shape{128}));

  t = trace_of(reduced_crnn1d("raw", cfg));
  EXPECT_EQ(find(t, "conv01"), (Shape{1021, 1, 8}));
  EXPECT_EQ(find(t, "conv02"), (Shape{507, 1, 16}));
  EXPECT_EQ(find(t, "pool02"), (Shape{63, 1, 16}));
  EXPECT_EQ(find(t, "pool1"), (Shape{15, 8, 8}));
  EXPECT_EQ(find(t, "reshape", 1), (Shape{15, 128}));
  EXPECT_EQ(find(t, "attention"), (Shape{64}));
}

TEST(ParameterCount, MatchesClosedForm) {
  for (const CrnnSpec &s : {full_crnn2d("mel", 75, 50), full_crnn1d("raw", 66650, 50),
                            reduced_crnn2d("mel", reduced()), reduced_crnn1d("raw", reduced())}) {
    ad::Rng rng(2);
    Crnn net(s, rng);
    std::vector<ad::Parameter *> ps;
    net.parameters(ps);
    EXPECT_EQ(nn::parameter_count(ps), expected_params(s)) << s.name;
  }
}

TEST(ParameterCount, ReducedIsUnderTenthOfFull) {
  NetworkConfig small = reduced();
  small.n_classes = 50;
  const CrnnSpec full = full_crnn2d("mel", 75, 50);
  const CrnnSpec red = reduced_crnn2d("mel", small);
  EXPECT_LT(10 * expected_params(red), expected_params(full));
  EXPECT_LT(10 * expected_params(reduced_crnn1d("raw", small)),
            expected_params(full_crnn1d("raw", 66650, 50)));
}

TEST(MultiView, BranchesAndJointWidth) {
  const NetworkConfig cfg = reduced();
  MultiViewNet net(cfg, 3);
  ASSERT_EQ(net.branches().size(), 5u);
  EXPECT_EQ(net.branches().back(), Branch::joint);
  ad::Rng rng(4);
  Tape tape;
  ForwardContext ctx{tape};
  BranchOutputs out = net.forward(ctx, random_inputs(tape, cfg, 3, rng));
  EXPECT_EQ(out.joint_input.shape(), (Shape{3, 4 * 64}));
  for (Branch b : net.branches()) {
    ASSERT_TRUE(out.has(b));
    const Tensor p = ad::softmax_rows(out.logits[index_of(b)].value());
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 4; ++c)
        s += p[r * 4 + c];
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(MultiView, FullScaleJointWidth) {
  NetworkConfig cfg;
  cfg.scale = Scale::full;
  cfg.n_classes = 50;
  std::size_t width = 0;
  for (View v : cfg.views)
    width += crnn_spec(v, cfg).embedding_dim();
  EXPECT_EQ(width, 2048u);
  EXPECT_EQ(joint_fc_widths(cfg), (std::vector<std::size_t>{4096, 4096}));
}

TEST(MultiView, TwoViews) {
  const NetworkConfig cfg = reduced({View::gam, View::raw});
  MultiViewNet net(cfg, 5);
  EXPECT_EQ(net.branches(), (std::vector<Branch>{Branch::gam, Branch::raw, Branch::joint}));
  ad::Rng rng(6);
  Tape tape;
  ForwardContext ctx{tape};
  BranchOutputs out = net.forward(ctx, random_inputs(tape, cfg, 2, rng));
  EXPECT_EQ(out.joint_input.shape(), (Shape{2, 128}));
  EXPECT_FALSE(out.has(Branch::mel));
}

TEST(MultiView, EmptyViewSetThrows) {
  EXPECT_THROW(MultiViewNet(reduced({}), 1), std::invalid_argument);
}

TEST(MultiView, MissingInputThrows) {
  const NetworkConfig cfg = reduced({View::mel});
  MultiViewNet net(cfg, 1);
  Tape tape;
  ForwardContext ctx{tape};
  EXPECT_THROW(net.forward(ctx, ViewInputs{}), std::invalid_argument);
}

TEST(MultiView, JointHeadDoesNotTouchViewBranches) {
  const NetworkConfig cfg = reduced();
  MultiViewNet net(cfg, 7);
  ad::Rng rng(8);
  std::vector<Tensor> inputs;
  {
    Tape tape;
    for (const Var &v : random_inputs(tape, cfg, 2, rng))
      inputs.push_back(v.value());
  }
  auto run = [&] {
    Tape tape;
    ForwardContext ctx{tape};
    ViewInputs in;
    for (std::size_t i = 0; i < 4; ++i)
      in[i] = tape.constant(inputs[i]);
    BranchOutputs out = net.forward(ctx, in);
    std::vector<Tensor> logits;
    for (const Var &l : out.logits)
      logits.push_back(l.value());
    return logits;
  };
  const auto before = run();
  std::vector<ad::Parameter *> joint;
  net.joint_head()->parameters(joint);
  for (auto *p : joint)
    p->value.fill(0.0);
  const auto after = run();
  for (View v : cfg.views)
    EXPECT_EQ(after[index_of(v)], before[index_of(v)]);
  for (double x : after[index_of(Branch::joint)].values())
    EXPECT_EQ(x, 0.0);
}

TEST(MultiView, SingleViewMatchesStandaloneSubnet) {
  const NetworkConfig cfg = reduced({View::cqt});
  MultiViewNet net(cfg, 9);
  ad::Rng other(123);
  Crnn alone(crnn_spec(View::cqt, cfg), other);
  std::vector<ad::Parameter *> dst;
  alone.parameters(dst);
  std::vector<ad::Parameter *> src;
  net.subnet(View::cqt).parameters(src);
  ASSERT_EQ(src.size(), dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    ASSERT_EQ(src[i]->name, dst[i]->name);
    dst[i]->value = src[i]->value;
  }
  ad::Rng rng(10);
  Tape tape;
  ForwardContext ctx{tape};
  const ViewInputs in = random_inputs(tape, cfg, 3, rng);
  BranchOutputs out = net.forward(ctx, in);
  EXPECT_EQ(out.logits[index_of(Branch::cqt)].value(),
            alone.forward(ctx, in[index_of(View::cqt)]).value());
}

TEST(NetworkConfig, KeyValueRoundTrip) {
  NetworkConfig cfg = reduced({View::mel, View::raw});
  cfg.dropout = 0.3;
  cfg.joint_head = false;
  cfg.bands = 32;
  const auto text = kv::format(cfg.to_key_values());
  const NetworkConfig back = NetworkConfig::from_key_values(kv::parse(text));
  EXPECT_EQ(back.to_key_values(), cfg.to_key_values());
  EXPECT_THROW(NetworkConfig::from_key_values({{"scale", "huge"}}), std::invalid_argument);
  EXPECT_THROW(NetworkConfig::from_key_values({{"gru_hidden", "-3"}}), std::invalid_argument);
}

TEST(NetworkConfig, Validation) {
  NetworkConfig cfg = reduced();
  cfg.bands = 12;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = reduced();
  cfg.n_classes = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
  const NetworkConfig cfg = reduced({View::mel, View::raw});
  MultiViewNet a(cfg, 11);
  // Exercise batchnorm running stats so they differ from their initial values.
  ad::Rng rng(12);
  {
    Tape tape;
    ForwardContext ctx{tape, true, &rng};
    a.forward(ctx, random_inputs(tape, cfg, 4, rng));
  }
  Checkpoint c;
  c.config = kv::format(cfg.to_key_values());
  c.tensors = snapshot_parameters(a);
  c.blend_weights = {0.1, 0, 0, 0.3, 0.6};
  c.branch_mask = 0b11001;
  c.best_validation_accuracy = 0.8125;
  c.step = 1234;
  c.epoch = 17;
  c.ledger = "opaque\0bytes";

  const auto path = std::filesystem::temp_directory_path() / "mvgb_ckpt_test" / "a.bckp";
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(serialize(back), serialize(c));
  EXPECT_EQ(back.step, 1234u);
  EXPECT_EQ(back.blend_weights, c.blend_weights);

  MultiViewNet b(NetworkConfig::from_key_values(kv::parse(back.config)), 99);
  restore_parameters(b, back.tensors);
  Tape tape;
  ForwardContext ctx{tape};
  const ViewInputs in = random_inputs(tape, cfg, 2, rng);
  const BranchOutputs oa = a.forward(ctx, in), ob = b.forward(ctx, in);
  for (Branch br : a.branches())
    EXPECT_EQ(oa.logits[index_of(br)].value(), ob.logits[index_of(br)].value());
  std::filesystem::remove_all(path.parent_path());
}

TEST(Checkpoint, RejectsCorruptInput) {
  Checkpoint c;
  c.tensors.emplace_back("w", Tensor({2, 2}, 1.0));
  std::string bytes = serialize(c);
  EXPECT_THROW(deserialize("XXXX" + bytes.substr(4)), CheckpointError);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  EXPECT_THROW(deserialize(bytes + "x"), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bckp"), CheckpointError);
}

TEST(Checkpoint, RestoreChecksNamesAndShapes) {
  MultiViewNet net(reduced({View::mel}), 1);
  auto tensors = snapshot_parameters(net);
  tensors.front().second = Tensor({1}, 0.0);
  EXPECT_THROW(restore_parameters(net, tensors), CheckpointError);
  tensors.erase(tensors.begin());
  EXPECT_THROW(restore_parameters(net, tensors), CheckpointError);
}
