"""DeepLabv3+ with a dilated MobileNetV2 backbone."""
import torch
from torch import nn
from torch.nn import functional as F

# expansion t, channels c, repeats n, stride s
MOBILENET_V2_STAGES = (
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
)


def make_divisible(v, divisor=8):
    new = max(divisor, int(v + divisor / 2) // divisor * divisor)
    return new + divisor if new < 0.9 * v else new


def _conv_bn(inp, oup, kernel, stride=1, dilation=1, groups=1, act=True):
    pad = dilation * (kernel - 1) // 2
    layers = [nn.Conv2d(inp, oup, kernel, stride, pad, dilation=dilation, groups=groups, bias=False),
              nn.BatchNorm2d(oup)]
    if act:
        layers.append(nn.ReLU6())
    return layers


class InvertedResidual(nn.Module):
    def __init__(self, inp, oup, stride, expand_ratio, dilation=1):
        super().__init__()
        hidden = int(round(inp * expand_ratio))
        self.use_residual = stride == 1 and inp == oup
        layers = [] if expand_ratio == 1 else _conv_bn(inp, hidden, 1)
        layers += _conv_bn(hidden, hidden, 3, stride, dilation, groups=hidden)
        layers += _conv_bn(hidden, oup, 1, act=False)
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        out = self.block(x)
        return x + out if self.use_residual else out


class MobileNetV2Backbone(nn.Module):
    """MobileNetV2 whose late strides are replaced by dilation to cap the output stride.

    ``forward`` returns ``(low_level, high_level)``: the stride-4 feature and
    the final feature map.
    """

    def __init__(self, width_mult=1.0, output_stride=16, num_stages=len(MOBILENET_V2_STAGES)):
        super().__init__()
        if not 1 <= num_stages <= len(MOBILENET_V2_STAGES):
            raise ValueError(f"num_stages must lie in 1..{len(MOBILENET_V2_STAGES)}")
        stem = make_divisible(32 * width_mult)
        self.stem = nn.Sequential(*_conv_bn(3, stem, 3, 2))
        blocks = []
        self.low_level_index = None
        stride, dilation, inp = 2, 1, stem
        for k, (t, c, n, s) in enumerate(MOBILENET_V2_STAGES[:num_stages]):
            oup = make_divisible(c * width_mult)
            if stride * s > output_stride:
                block_stride, next_dilation = 1, dilation * s
            else:
                block_stride, next_dilation = s, dilation
                stride *= s
            for i in range(n):
                # the first block of a converted stage keeps the old dilation
                blocks.append(InvertedResidual(inp, oup, block_stride if i == 0 else 1, t,
                                               dilation if i == 0 else next_dilation))
                inp = oup
            dilation = next_dilation
            if stride == 4 and self.low_level_index is None and k + 1 < num_stages \
                    and MOBILENET_V2_STAGES[k + 1][3] == 2:
                self.low_level_index = len(blocks)
        self.blocks = nn.Sequential(*blocks)
        if self.low_level_index is None:
            self.low_level_index = len(blocks)
        self.output_stride = stride
        self.out_channels = inp
        low = self.blocks[:self.low_level_index]
        self.low_level_channels = stem if len(low) == 0 else low[-1].block[-1].num_features

    def forward(self, x):
        x = self.stem(x)
        low = self.blocks[:self.low_level_index](x)
        high = self.blocks[self.low_level_index:](low)
        return low, high


class ASPP(nn.Module):
    """Parallel 1x1, dilated 3x3 and image-pooling branches, fused by a 1x1 conv."""

    def __init__(self, inp, channels, rates):
        super().__init__()
        self.branches = nn.ModuleList([nn.Sequential(*_relu(_conv_bn(inp, channels, 1)))])
        for r in rates:
            self.branches.append(nn.Sequential(*_relu(_conv_bn(inp, channels, 3, dilation=r))))
        # no BatchNorm on the pooled branch: a 1x1 map per sample breaks batch-1 statistics
        self.pool = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Conv2d(inp, channels, 1), nn.ReLU())
        self.project = nn.Sequential(*_relu(_conv_bn(channels * (len(rates) + 2), channels, 1)))

    def forward(self, x):
        outs = [b(x) for b in self.branches]
        outs.append(self.pool(x).expand(-1, -1, x.shape[2], x.shape[3]))
        return self.project(torch.cat(outs, dim=1))


def _relu(layers):
    return [nn.ReLU() if isinstance(m, nn.ReLU6) else m for m in layers]


class DeepLabV3Plus(nn.Module):
    def __init__(self, num_classes=6, width_mult=0.35, output_stride=16, aspp_rates=(6, 12, 18),
                 aspp_channels=64, low_level_channels=24, decoder_channels=64, num_stages=7):
        super().__init__()
        self.backbone = MobileNetV2Backbone(width_mult, output_stride, num_stages)
        self.aspp = ASPP(self.backbone.out_channels, aspp_channels, aspp_rates)
        self.low_proj = nn.Sequential(*_relu(_conv_bn(self.backbone.low_level_channels,
                                                      low_level_channels, 1)))
        self.decoder = nn.Sequential(
            *_relu(_conv_bn(aspp_channels + low_level_channels, decoder_channels, 3)),
            *_relu(_conv_bn(decoder_channels, decoder_channels, 3)),
        )
        self.classifier = nn.Conv2d(decoder_channels, num_classes, 1)

    @property
    def output_stride(self):
        return self.backbone.output_stride

    def forward(self, x, return_features=False):
        size = x.shape[2:]
        low, high = self.backbone(x)
        h = self.aspp(high)
        h = F.interpolate(h, size=low.shape[2:], mode="bilinear", align_corners=False)
        h = self.decoder(torch.cat([h, self.low_proj(low)], dim=1))
        logits = F.interpolate(self.classifier(h), size=size, mode="bilinear", align_corners=False)
        if return_features:
            return logits, high
        return logits
