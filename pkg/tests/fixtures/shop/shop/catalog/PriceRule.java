package shop.catalog;

public interface PriceRule {
    int apply(int cents);
}
